//! Tikhonov-shifted compressive sampling matching pursuit.
//!
//! Each iteration:
//!
//! 1. proxy `y = H^H r`
//! 2. `Omega` = indices of the `2k` largest `|y|`
//! 3. `F = Omega ∪ Gamma`
//! 4. solve `(H_F^H H_F + lambda I) s = H_F^H e`
//! 5. `Gamma` = indices of the `k` largest `|s|`; `tau_Gamma = s_Gamma`, zero elsewhere
//! 6. `r = e - H tau`
//!
//! starting from `r = e`, `Gamma = {}`, and stopping once
//! `|r_n - r_{n-1}| / |r_n| <= stop_tol` or after `max_iterations`.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ScatteringOperator;
use crate::linalg::{adjoint_mul, lu_solve_checked};

const BACKWARD_ERROR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosampConfig {
    /// Target sparsity.
    pub k: usize,
    /// Tikhonov shift added to the restricted Gram diagonal.
    pub lambda: f64,
    pub max_iterations: usize,
    pub stop_tol: f64,
}

impl CosampConfig {
    pub fn new(k: usize, lambda: f64) -> Self {
        CosampConfig {
            k,
            lambda,
            max_iterations: 100,
            stop_tol: 1e-6,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.stop_tol.is_finite() && self.stop_tol > 0.0) {
            return Err(Error::invalid(format!("stop_tol must be > 0, got {}", self.stop_tol)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Snapshot of one iteration, handed to trace observers.
#[derive(Debug, Clone)]
pub struct CosampState {
    pub iteration: usize,
    pub residual: DVector<Complex64>,
    pub proxy: DVector<Complex64>,
    pub omega: Vec<usize>,
    pub merged: Vec<usize>,
    pub restricted_solution: DVector<Complex64>,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    /// Recovered contrast samples, non-zero only on `support`.
    pub tau: DVector<Complex64>,
    pub support: Vec<usize>,
    /// `|r|` before the first iteration and after each one.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ReconstructionResult {
    pub fn real_part(&self) -> Vec<f64> {
        self.tau.iter().map(|z| z.re).collect()
    }
}

/// Indices of the `count` largest entries, ties to the lower index, returned
/// ascending.
pub fn top_support(values: &[f64], count: usize) -> Result<Vec<usize>> {
    if count > values.len() {
        return Err(Error::invalid(format!(
            "cannot pick {count} indices from {} entries",
            values.len()
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(count);
    order.sort_unstable();
    Ok(order)
}

/// Solves the shifted normal equations on the columns `cols`:
/// `(H_F^H H_F + lambda I) s = H_F^H e`.
pub fn restricted_ls_solve(
    h: &ScatteringOperator,
    cols: &[usize],
    lambda: f64,
    e_meas: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    if cols.is_empty() {
        return Err(Error::invalid("restricted solve needs a non-empty column set"));
    }
    if let Some(&c) = cols.iter().find(|&&c| c >= h.ncols()) {
        return Err(Error::invalid(format!("column {c} out of range")));
    }
    if e_meas.len() != h.nrows() {
        return Err(Error::invalid("measurement length does not match operator rows"));
    }
    let a = h.columns(cols);
    solve_shifted(&a, lambda, e_meas)
}

fn solve_shifted(
    a: &nalgebra::DMatrix<Complex64>,
    lambda: f64,
    e_meas: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let mut gram = adjoint_mul(a, a);
    for i in 0..gram.nrows() {
        gram[(i, i)] += Complex64::new(lambda, 0.0);
    }
    let rhs = a.ad_mul(e_meas);
    lu_solve_checked(&gram, &rhs, BACKWARD_ERROR_TOL)
}

/// Runs shifted CoSaMP to convergence.
pub fn cosamp_reconstruct(
    h: &ScatteringOperator,
    e_meas: &DVector<Complex64>,
    cfg: &CosampConfig,
) -> Result<ReconstructionResult> {
    cosamp_reconstruct_traced(h, e_meas, cfg, |_| {})
}

/// As [`cosamp_reconstruct`], calling `observe` after every iteration.
pub fn cosamp_reconstruct_traced(
    h: &ScatteringOperator,
    e_meas: &DVector<Complex64>,
    cfg: &CosampConfig,
    mut observe: impl FnMut(&CosampState),
) -> Result<ReconstructionResult> {
    cfg.validate()?;
    let n = h.ncols();
    if e_meas.len() != h.nrows() {
        return Err(Error::invalid(format!(
            "measurement length {} does not match operator rows {}",
            e_meas.len(),
            h.nrows()
        )));
    }
    if cfg.k > n {
        return Err(Error::invalid(format!("k = {} exceeds N = {n}", cfg.k)));
    }
    if e_meas.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("measurements contain non-finite values"));
    }
    let mut tau = DVector::zeros(n);
    let mut residual = e_meas.clone();
    let mut history = vec![residual.norm()];
    if cfg.k == 0 {
        return Ok(ReconstructionResult {
            tau,
            support: Vec::new(),
            residual_history: history,
            iterations: 1,
            converged: true,
        });
    }

    let mut support: Vec<usize> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let candidates = (2 * cfg.k).min(n);
    for iteration in 1..=cfg.max_iterations {
        iterations = iteration;
        let proxy = h.adjoint_apply(&residual);
        let magnitudes: Vec<f64> = proxy.iter().map(|z| z.norm()).collect();
        let omega = top_support(&magnitudes, candidates)?;

        let mut merged = omega.clone();
        merged.extend_from_slice(&support);
        merged.sort_unstable();
        merged.dedup();

        let a = h.columns(&merged);
        let s = solve_shifted(&a, cfg.lambda, e_meas)?;
        let s_mag: Vec<f64> = s.iter().map(|z| z.norm()).collect();
        let keep = top_support(&s_mag, cfg.k.min(merged.len()))?;

        tau.fill(Complex64::new(0.0, 0.0));
        let mut kept_values = DVector::zeros(merged.len());
        support = keep.iter().map(|&i| merged[i]).collect();
        for &i in &keep {
            tau[merged[i]] = s[i];
            kept_values[i] = s[i];
        }

        let next = e_meas - &a * &kept_values;
        let change = (&next - &residual).norm();
        let norm = next.norm();
        residual = next;
        history.push(norm);

        observe(&CosampState {
            iteration,
            residual: residual.clone(),
            proxy,
            omega,
            merged,
            restricted_solution: s,
            support: support.clone(),
        });

        if norm == 0.0 || change <= cfg.stop_tol * norm {
            converged = true;
            break;
        }
    }

    Ok(ReconstructionResult {
        tau,
        support,
        residual_history: history,
        iterations,
        converged,
    })
}
