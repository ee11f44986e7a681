//! Spectral diagnostics of the scattering operator and its Tikhonov shift.
//!
//! The shifted operator is characterised through its Gram matrix
//! `H^H H + lambda I`, whose eigenvalues are the squared singular values of
//! the shifted operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ScatteringOperator;
use crate::linalg::{adjoint_mul, hermitian_eigenvalues};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipDiagnostics {
    pub lambda: f64,
    /// Extreme eigenvalues of `H^H H`.
    pub gram_min: f64,
    pub gram_max: f64,
    /// Extreme eigenvalues of `H^H H + lambda I`, computed from the shifted
    /// matrix itself.
    pub shifted_min: f64,
    pub shifted_max: f64,
}

impl RipDiagnostics {
    /// Singular values `(min, max)` of `H`; roundoff-negative eigenvalues
    /// count as zero.
    pub fn singular_values(&self) -> (f64, f64) {
        (self.gram_min.max(0.0).sqrt(), self.gram_max.max(0.0).sqrt())
    }

    pub fn shifted_singular_values(&self) -> (f64, f64) {
        (self.shifted_min.max(0.0).sqrt(), self.shifted_max.max(0.0).sqrt())
    }

    /// `sigma_min / sigma_max` of `H^H H`.
    pub fn gram_ratio(&self) -> f64 {
        ratio(self.gram_min, self.gram_max)
    }

    pub fn shifted_ratio(&self) -> f64 {
        ratio(self.shifted_min, self.shifted_max)
    }

    /// Lower bound on the isometry constant of the operator rescaled to unit
    /// spectral norm: `1 - sigma_min^2 / sigma_max^2`. A value of 1 means no
    /// constant below 1 exists.
    pub fn ric_lower_bound(&self) -> f64 {
        1.0 - self.gram_ratio().max(0.0)
    }

    pub fn shifted_ric_lower_bound(&self) -> f64 {
        1.0 - self.shifted_ratio().max(0.0)
    }
}

fn ratio(lo: f64, hi: f64) -> f64 {
    if hi > 0.0 {
        lo / hi
    } else {
        0.0
    }
}

/// Isometry-constant bound `max(1 - s_min^2, s_max^2 - 1)` for an operator
/// with extreme singular values `s_min`, `s_max`, taken as is.
pub fn ric_bound(s_min: f64, s_max: f64) -> f64 {
    (1.0 - s_min * s_min).max(s_max * s_max - 1.0)
}

pub fn rip_diagnostics(h: &ScatteringOperator, lambda: f64) -> Result<RipDiagnostics> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if h.ncols() == 0 {
        return Err(Error::invalid("operator has no columns"));
    }
    let gram = adjoint_mul(h.matrix(), h.matrix());
    let eig = hermitian_eigenvalues(&gram);
    let mut shifted = gram;
    for i in 0..shifted.nrows() {
        shifted[(i, i)].re += lambda;
    }
    let eig_shifted = hermitian_eigenvalues(&shifted);
    Ok(RipDiagnostics {
        lambda,
        gram_min: eig[0],
        gram_max: *eig.last().unwrap(),
        shifted_min: eig_shifted[0],
        shifted_max: *eig_shifted.last().unwrap(),
    })
}
