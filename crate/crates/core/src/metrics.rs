//! Reconstruction error, sparsity-estimate histograms and image output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Grid;

/// `|tau - tau_ref|_2 / |tau_ref|_2`.
pub fn reconstruction_error(tau: &[Complex64], tau_ref: &[f64]) -> Result<f64> {
    if tau.len() != tau_ref.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs reference {}",
            tau.len(),
            tau_ref.len()
        )));
    }
    let reference: f64 = tau_ref.iter().map(|v| v * v).sum::<f64>().sqrt();
    if reference == 0.0 {
        return Err(Error::invalid("reference contrast is identically zero"));
    }
    let diff: f64 = tau
        .iter()
        .zip(tau_ref)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(diff / reference)
}

/// Summary of one reconstruction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub err: f64,
    pub k: usize,
    pub k_hat: usize,
    pub lambda: f64,
    pub snr_db: Option<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
}

/// Normalised frequency of each `|k - k_hat|` value, plus the smallest true
/// `k` observed in each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub frequencies: BTreeMap<usize, f64>,
    pub k_min: BTreeMap<usize, usize>,
    pub total: usize,
}

impl HistogramReport {
    pub fn frequency(&self, bin: usize) -> f64 {
        self.frequencies.get(&bin).copied().unwrap_or(0.0)
    }

    pub fn max_error(&self) -> usize {
        self.frequencies.keys().next_back().copied().unwrap_or(0)
    }

    /// `abs_error,frequency,k_min`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("abs_error,frequency,k_min\n");
        for (bin, f) in &self.frequencies {
            let _ = writeln!(s, "{bin},{f},{}", self.k_min[bin]);
        }
        s
    }
}

/// Builds the histogram from `(k, k_hat)` pairs.
pub fn khat_histogram(pairs: &[(usize, usize)]) -> Result<HistogramReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("histogram needs at least one case"));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut k_min: BTreeMap<usize, usize> = BTreeMap::new();
    for &(k, k_hat) in pairs {
        let bin = k.abs_diff(k_hat);
        *counts.entry(bin).or_default() += 1;
        k_min.entry(bin).and_modify(|m| *m = (*m).min(k)).or_insert(k);
    }
    let total = pairs.len();
    Ok(HistogramReport {
        frequencies: counts
            .into_iter()
            .map(|(b, c)| (b, c as f64 / total as f64))
            .collect(),
        k_min,
        total,
    })
}

/// Grey level for `value` on a linear ramp from `0` (black) to `max`
/// (white = 255), clamped. A non-positive `max` maps everything to black.
pub fn gray_level(value: f64, max: f64) -> u8 {
    if !(max > 0.0) || !(value > 0.0) {
        return 0;
    }
    (255.0 * (value / max).min(1.0)).round() as u8
}

/// Writes `tau` as an `n_side x n_side` binary PGM (row 0 at the top, as in
/// the grid numbering) and a CSV twin `row,col,value` next to it. Grey levels
/// follow [`gray_level`] with `max` = `display_max` if given, otherwise the
/// largest value in `tau`. Returns the CSV path.
pub fn render_contrast(tau: &[f64], grid: &Grid, path: &Path, display_max: Option<f64>) -> Result<PathBuf> {
    if tau.len() != grid.len() {
        return Err(Error::invalid(format!(
            "contrast has {} samples, grid has {} cells",
            tau.len(),
            grid.len()
        )));
    }
    let n = grid.n_side();
    let max = display_max.unwrap_or_else(|| tau.iter().copied().fold(0.0, f64::max));
    let mut pgm = format!("P5\n{n} {n}\n255\n").into_bytes();
    pgm.extend(tau.iter().map(|v| gray_level(*v, max)));
    crate::io::write_file(path, &pgm)?;

    let mut csv = String::from("row,col,value\n");
    for (i, v) in tau.iter().enumerate() {
        let (r, c) = grid.row_col(i);
        let _ = writeln!(csv, "{r},{c},{v}");
    }
    let csv_path = path.with_extension("csv");
    crate::io::write_file(&csv_path, csv.as_bytes())?;
    Ok(csv_path)
}

/// Reads a contrast CSV written by [`render_contrast`].
pub fn read_contrast_csv(path: &Path, grid: &Grid) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = vec![0.0; grid.len()];
    let n = grid.n_side();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let parse = || -> Option<(usize, usize, f64)> {
            Some((f.first()?.parse().ok()?, f.get(1)?.parse().ok()?, f.get(2)?.parse().ok()?))
        };
        let (r, c, v) = parse()
            .filter(|(r, c, _)| *r < n && *c < n)
            .ok_or_else(|| Error::format("contrast csv", format!("line {}", i + 1)))?;
        out[r * n + c] = v;
    }
    Ok(out)
}
