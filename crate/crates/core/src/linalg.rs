//! Dense complex helpers on top of nalgebra.
//!
//! Complex products are split into real GEMMs so they run through the
//! blocked `f64` kernels.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

fn split(m: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

/// `a^H b`.
pub fn adjoint_mul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.nrows(), b.nrows(), "adjoint_mul: row mismatch");
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = ar.tr_mul(&br) + ai.tr_mul(&bi);
    let im = ar.tr_mul(&bi) - ai.tr_mul(&br);
    DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
}

/// `a b`.
pub fn mul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.ncols(), b.nrows(), "mul: shape mismatch");
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
}

/// Solves `A x = b` by partial-pivot LU, rejecting numerically singular
/// systems and checking the normwise backward error
/// `|Ax - b| / (|A|_F |x| + |b|)` against `tol`.
pub fn lu_solve_checked(a: &DMatrix<Complex64>, b: &DVector<Complex64>, tol: f64) -> Result<DVector<Complex64>> {
    let lu = a.clone().lu();
    let condition = pivot_condition(&lu.u().diagonal());
    if !(condition.is_finite() && condition < 1e15) {
        return Err(Error::SolverFailure {
            message: "restricted system is singular".into(),
            condition,
        });
    }
    let x = lu.solve(b).ok_or_else(|| Error::SolverFailure {
        message: "LU solve failed".into(),
        condition,
    })?;
    let residual = (a * &x - b).norm();
    let scale = a.norm() * x.norm() + b.norm();
    if scale > 0.0 && !(residual <= tol * scale) {
        return Err(Error::SolverFailure {
            message: format!("backward error {:.3e} exceeds {tol:.1e}", residual / scale),
            condition,
        });
    }
    Ok(x)
}

/// Ratio of the largest to smallest pivot magnitude.
pub fn pivot_condition(diag: &DVector<Complex64>) -> f64 {
    if diag.is_empty() {
        return 1.0;
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for d in diag.iter() {
        lo = lo.min(d.norm());
        hi = hi.max(d.norm());
    }
    hi / lo
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest eigenvalue of `H^H H` by power iteration from a fixed start.
pub fn gram_spectral_radius(h: &DMatrix<Complex64>) -> f64 {
    let n = h.ncols();
    if n == 0 || h.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut estimate = 0.0;
    for _ in 0..500 {
        let w = h.ad_mul(&(h * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.unscale(norm);
        if (next - estimate).abs() <= 1e-13 * next {
            return next;
        }
        estimate = next;
    }
    estimate
}
