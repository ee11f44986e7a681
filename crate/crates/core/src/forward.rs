//! Full (multiple-scattering) forward solve used to synthesise data, and the
//! Born-linearised scattering operator used for inversion.
//!
//! The discretised domain equation is
//!
//! ```text
//! (I - Gd D{tau}) E_tot = E_inc
//! ```
//!
//! Columns of `Gd D{tau}` vanish outside the support `S` of `tau`, so the
//! system decouples: `E_tot[S]` solves the `|S| x |S|` block exactly and the
//! off-support samples follow by one matrix-vector product.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BackgroundMedium, ContrastVector, Grid, SensorLayout};
use crate::green::{
    incident_field, incident_field_at, receiver_green_columns, FieldVector, GreenDomainMatrix,
    GreenReceiverMatrix,
};

const RESIDUAL_TOL: f64 = 1e-10;

/// LU factorisation of `I - Gd[S,S] D{tau_S}` reusable across transmitters.
pub struct SupportSystem {
    support: Vec<usize>,
    tau: Vec<f64>,
    matrix: DMatrix<Complex64>,
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

impl SupportSystem {
    pub fn new(contrast: &ContrastVector, gd: &GreenDomainMatrix) -> Result<Self> {
        if contrast.len() != gd.len() {
            return Err(Error::invalid(format!(
                "contrast has {} samples but the domain operator has {}",
                contrast.len(),
                gd.len()
            )));
        }
        let support = contrast.support();
        let tau: Vec<f64> = support.iter().map(|&n| contrast.values()[n]).collect();
        let mut matrix = gd.submatrix(&support, &support);
        for (j, t) in tau.iter().enumerate() {
            matrix.column_mut(j).scale_mut(-*t);
            matrix[(j, j)] += Complex64::new(1.0, 0.0);
        }
        let lu = matrix.clone().lu();
        let diag = lu.u().diagonal();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for d in diag.iter() {
            lo = lo.min(d.norm());
            hi = hi.max(d.norm());
        }
        let condition = if support.is_empty() { 1.0 } else { hi / lo };
        if !(condition.is_finite() && condition < 1e14) {
            return Err(Error::SolverFailure {
                message: "domain equation is singular".into(),
                condition,
            });
        }
        Ok(SupportSystem {
            support,
            tau,
            matrix,
            lu,
            condition,
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Pivot-ratio estimate of the condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    /// Solves for the total field on the support given `E_inc[S]`.
    pub fn solve(&self, e_inc_support: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if self.support.is_empty() {
            return Ok(DVector::zeros(0));
        }
        let x = self.lu.solve(e_inc_support).ok_or_else(|| Error::SolverFailure {
            message: "LU solve failed".into(),
            condition: self.condition,
        })?;
        let residual = (&self.matrix * &x - e_inc_support).norm();
        let scale = e_inc_support.norm().max(f64::MIN_POSITIVE);
        if !(residual <= RESIDUAL_TOL * scale) {
            return Err(Error::SolverFailure {
                message: format!("domain equation residual {:.3e} too large", residual / scale),
                condition: self.condition,
            });
        }
        Ok(x)
    }
}

/// Solves `(I - Gd D{tau}) E_tot = E_inc` over the whole grid.
pub fn solve_total_field(
    contrast: &ContrastVector,
    e_inc: &FieldVector,
    gd: &GreenDomainMatrix,
) -> Result<FieldVector> {
    if e_inc.len() != gd.len() {
        return Err(Error::invalid("incident field length does not match the grid"));
    }
    let system = SupportSystem::new(contrast, gd)?;
    let support = system.support().to_vec();
    if support.is_empty() {
        return Ok(e_inc.clone());
    }
    let rhs = DVector::from_iterator(support.len(), support.iter().map(|&n| e_inc[n]));
    let on_support = system.solve(&rhs)?;
    let weighted: Vec<Complex64> = on_support
        .iter()
        .zip(&system.tau)
        .map(|(e, t)| e * *t)
        .collect();
    let mut total = e_inc.clone();
    let values: Vec<Complex64> = (0..gd.len())
        .into_par_iter()
        .map(|n| match support.binary_search(&n) {
            Ok(i) => on_support[i],
            Err(_) => {
                let mut acc = e_inc[n];
                for (j, &m) in support.iter().enumerate() {
                    acc += gd.entry(n, m) * weighted[j];
                }
                acc
            }
        })
        .collect();
    total.copy_from_slice(&values);
    Ok(total)
}

/// `Esca = Gbar D{E_tot} tau`.
pub fn scattered_at_receivers(
    contrast: &ContrastVector,
    e_tot: &FieldVector,
    gr: &GreenReceiverMatrix,
) -> Result<FieldVector> {
    if contrast.len() != gr.ncols() || e_tot.len() != gr.ncols() {
        return Err(Error::invalid(format!(
            "dimension mismatch: contrast {}, field {}, Green matrix {} columns",
            contrast.len(),
            e_tot.len(),
            gr.ncols()
        )));
    }
    let weighted = DVector::from_iterator(
        e_tot.len(),
        e_tot.iter().zip(contrast.values()).map(|(e, t)| e * *t),
    );
    Ok(&gr.matrix * weighted)
}

/// Noiseless scattered field for every transmitter, stacked transmitter-major
/// (`row = i * N^R + m`), computed with the full domain solve.
pub fn simulate_scattered_field(
    contrast: &ContrastVector,
    grid: &Grid,
    sensors: &SensorLayout,
    medium: &BackgroundMedium,
) -> Result<DVector<Complex64>> {
    let gd = GreenDomainMatrix::new(grid, medium)?;
    let system = SupportSystem::new(contrast, &gd)?;
    let support = system.support().to_vec();
    let nr = sensors.n_receivers();
    let mut out = DVector::zeros(sensors.n_measurements());
    if support.is_empty() {
        return Ok(out);
    }
    let gr = receiver_green_columns(grid, &sensors.receivers, medium, &support)?;
    for (i, tx) in sensors.transmitters.iter().enumerate() {
        let e_inc = incident_field_at(tx, grid, medium, &support)?;
        let e_tot = system.solve(&e_inc)?;
        let weighted = DVector::from_iterator(
            support.len(),
            e_tot.iter().zip(&system.tau).map(|(e, t)| e * *t),
        );
        let block = &gr.matrix * weighted;
        out.rows_mut(i * nr, nr).copy_from(&block);
    }
    Ok(out)
}

/// Stacked Born operator `H = [Gbar D{E_1^inc}; ...; Gbar D{E_NT^inc}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringOperator {
    matrix: DMatrix<Complex64>,
    n_transmitters: usize,
    n_receivers: usize,
}

impl ScatteringOperator {
    pub fn from_matrix(
        matrix: DMatrix<Complex64>,
        n_transmitters: usize,
        n_receivers: usize,
    ) -> Result<Self> {
        if matrix.nrows() != n_transmitters * n_receivers {
            return Err(Error::invalid(format!(
                "operator has {} rows, expected {n_transmitters} x {n_receivers}",
                matrix.nrows()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("operator has non-finite entries"));
        }
        Ok(ScatteringOperator {
            matrix,
            n_transmitters,
            n_receivers,
        })
    }

    /// Wraps a generic matrix as a single-transmitter operator.
    pub fn from_dense(matrix: DMatrix<Complex64>) -> Result<Self> {
        let rows = matrix.nrows();
        Self::from_matrix(matrix, 1, rows)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_transmitters(&self) -> usize {
        self.n_transmitters
    }

    pub fn n_receivers(&self) -> usize {
        self.n_receivers
    }

    /// `H tau` for a real contrast vector.
    pub fn apply(&self, tau: &[f64]) -> Result<DVector<Complex64>> {
        if tau.len() != self.ncols() {
            return Err(Error::invalid(format!(
                "contrast length {} does not match operator width {}",
                tau.len(),
                self.ncols()
            )));
        }
        let mut out = DVector::zeros(self.nrows());
        for (n, t) in tau.iter().enumerate() {
            if *t != 0.0 {
                out.axpy(Complex64::new(*t, 0.0), &self.matrix.column(n), Complex64::new(1.0, 0.0));
            }
        }
        Ok(out)
    }

    /// `H x` for complex coefficients.
    pub fn apply_complex(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * x
    }

    /// `H^H r`.
    pub fn adjoint_apply(&self, r: &DVector<Complex64>) -> DVector<Complex64> {
        self.matrix.ad_mul(r)
    }

    /// Gram matrix `H^H H`.
    pub fn gram(&self) -> DMatrix<Complex64> {
        self.matrix.ad_mul(&self.matrix)
    }

    /// Columns listed in `cols`, in order.
    pub fn columns(&self, cols: &[usize]) -> DMatrix<Complex64> {
        self.matrix.select_columns(cols)
    }
}

/// Assembles the Born operator for a grid and sensor layout.
pub fn born_operator(
    grid: &Grid,
    sensors: &SensorLayout,
    medium: &BackgroundMedium,
) -> Result<ScatteringOperator> {
    let gr = crate::green::assemble_receiver_green(grid, sensors, medium)?;
    let incident = sensors
        .transmitters
        .iter()
        .map(|tx| incident_field(tx, grid, medium))
        .collect::<Result<Vec<_>>>()?;
    let nr = sensors.n_receivers();
    let nt = sensors.n_transmitters();
    let matrix = DMatrix::from_fn(nt * nr, grid.len(), |row, n| {
        gr.matrix[(row % nr, n)] * incident[row / nr][n]
    });
    ScatteringOperator::from_matrix(matrix, nt, nr)
}
