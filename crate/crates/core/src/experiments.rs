//! Scripted reconstruction experiments.
//!
//! | name    | scripted sweep                                                   |
//! |---------|------------------------------------------------------------------|
//! | `fig2f` | sparsity estimate error versus test frequency (needs a model)    |
//! | `fig3`  | point targets, err versus SNR                                    |
//! | `fig4`  | two cylinders: base run, `k_hat` sweep, sensor-count sweep       |
//! | `fig5`  | Austria profile: base run, `k_hat` sweep                         |
//! | `fig6`  | L-shaped scatterer: base run                                     |
//!
//! Every run uses the seeds listed in its config; tables hold one row per
//! seed plus `mean` rows. `k_hat` comes from the model when the config names
//! one, otherwise the true `k` is used.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cosamp::{cosamp_reconstruct, CosampConfig, ReconstructionResult};
use crate::error::{Error, Result};
use crate::forward::{born_operator, simulate_scattered_field, ScatteringOperator};
use crate::geometry::{place_sensors, sparsity, BackgroundMedium, ContrastVector, Grid, SensorLayout};
use crate::linalg::gram_spectral_radius;
use crate::measurements::add_awgn;
use crate::metrics::{reconstruction_error, render_contrast, ErrorReport};
use crate::net::{load_model, predict, MlpModel};
use crate::scene::{rasterize_scene, GridConfig, SceneDescriptor, SensorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Fig2f,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl ExperimentKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "fig2f" => ExperimentKind::Fig2f,
            "fig3" => ExperimentKind::Fig3,
            "fig4" => ExperimentKind::Fig4,
            "fig5" => ExperimentKind::Fig5,
            "fig6" => ExperimentKind::Fig6,
            other => {
                return Err(Error::invalid(format!(
                    "unknown experiment {other:?}; expected fig2f, fig3, fig4, fig5 or fig6"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2f => "fig2f",
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::Fig4 => "fig4",
            ExperimentKind::Fig5 => "fig5",
            ExperimentKind::Fig6 => "fig6",
        }
    }
}

/// Optional sweeps; each experiment reads the ones it scripts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sweeps {
    /// Offsets added to the sparsity estimate.
    #[serde(default)]
    pub k_offsets: Vec<i64>,
    /// Square sensor configurations `N^T = N^R = n`.
    #[serde(default)]
    pub sensor_counts: Vec<usize>,
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub frequencies_hz: Vec<f64>,
}

/// Held-out scene and candidates for choosing `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaTuning {
    pub scene: SceneDescriptor,
    pub seeds: Vec<u64>,
    /// Candidate values of `lambda / sigma_max(H^H H)`.
    pub candidates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: ExperimentKind,
    pub seeds: Vec<u64>,
    pub snr_db: f64,
    pub frequency_hz: f64,
    /// `lambda = lambda_rel * sigma_max(H^H H)`.
    pub lambda_rel: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    /// Sparsity model; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    pub grid: GridConfig,
    pub sensors: SensorConfig,
    pub scene: SceneDescriptor,
    #[serde(default)]
    pub sweeps: Sweeps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<LambdaTuning>,
}

fn default_max_iterations() -> usize {
    100
}

fn default_stop_tol() -> f64 {
    1e-6
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("experiment config", e))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("experiment config", e))
    }

    /// Reads a config, resolving `model` relative to the file.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(m), Some(dir)) = (&cfg.model, path.parent()) {
            if m.is_relative() {
                cfg.model = Some(dir.join(m));
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("experiment needs at least one seed"));
        }
        if !(self.lambda_rel.is_finite() && self.lambda_rel >= 0.0) {
            return Err(Error::invalid("lambda_rel must be >= 0"));
        }
        self.scene.validate()
    }
}

/// Tables (file name, CSV text) and written images of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub tables: Vec<(String, String)>,
    pub images: Vec<PathBuf>,
    /// Headline numbers, e.g. `mean_err`.
    pub summary: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn table(&self, name: &str) -> Option<&str> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_str())
    }

    /// Writes every table into `dir`.
    pub fn write_tables(&self, dir: &Path) -> Result<()> {
        for (name, text) in &self.tables {
            crate::io::write_file(&dir.join(name), text.as_bytes())?;
        }
        Ok(())
    }
}

/// Physical setup shared by the runs of one experiment.
pub struct Setup {
    pub grid: Grid,
    pub medium: BackgroundMedium,
    pub sensors: SensorLayout,
    pub reference: ContrastVector,
    pub k: usize,
    pub operator: ScatteringOperator,
    pub lambda: f64,
    clean: DVector<Complex64>,
}

impl Setup {
    pub fn new(
        cfg: &ExperimentConfig,
        scene: &SceneDescriptor,
        sensors: SensorConfig,
        frequency_hz: f64,
    ) -> Result<Self> {
        let grid = Grid::new(cfg.grid.side_length, cfg.grid.n_side)?;
        let medium = BackgroundMedium::vacuum(frequency_hz)?;
        let layout = place_sensors(sensors.n_transmitters, sensors.n_receivers, sensors.radius, &grid)?;
        let reference = rasterize_scene(scene, &grid)?;
        let clean = simulate_scattered_field(&reference, &grid, &layout, &medium)?;
        let operator = born_operator(&grid, &layout, &medium)?;
        let lambda = cfg.lambda_rel * gram_spectral_radius(operator.matrix());
        Ok(Setup {
            k: sparsity(&reference),
            grid,
            medium,
            sensors: layout,
            reference,
            operator,
            lambda,
            clean,
        })
    }

    /// Noiseless scattered field at the receivers.
    pub fn clean(&self) -> &DVector<Complex64> {
        &self.clean
    }

    pub fn measurements(&self, snr_db: f64, seed: u64) -> Result<DVector<Complex64>> {
        add_awgn(&self.clean, snr_db, seed)
    }

    pub fn reconstruct(
        &self,
        cfg: &ExperimentConfig,
        meas: &DVector<Complex64>,
        k_hat: usize,
    ) -> Result<(ReconstructionResult, f64)> {
        let cosamp = CosampConfig {
            k: k_hat.min(self.grid.len()),
            lambda: self.lambda,
            max_iterations: cfg.max_iterations,
            stop_tol: cfg.stop_tol,
        };
        let r = cosamp_reconstruct(&self.operator, meas, &cosamp)?;
        let err = reconstruction_error(r.tau.as_slice(), self.reference.values())?;
        Ok((r, err))
    }
}

struct SeedRun {
    seed: u64,
    report: ErrorReport,
    result: ReconstructionResult,
}

fn estimate_k(model: Option<&MlpModel>, meas: &DVector<Complex64>, n: usize, k: usize) -> Result<usize> {
    match model {
        Some(m) => Ok(predict(m, meas)?.k_hat(n)),
        None => Ok(k),
    }
}

fn run_seeds(
    cfg: &ExperimentConfig,
    setup: &Setup,
    model: Option<&MlpModel>,
    snr_db: f64,
    k_offset: i64,
) -> Result<Vec<SeedRun>> {
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let meas = setup.measurements(snr_db, seed)?;
            let base = estimate_k(model, &meas, setup.grid.len(), setup.k)?;
            let k_hat = (base as i64 + k_offset).max(0) as usize;
            let start = Instant::now();
            let (result, err) = setup.reconstruct(cfg, &meas, k_hat)?;
            Ok(SeedRun {
                seed,
                report: ErrorReport {
                    err,
                    k: setup.k,
                    k_hat,
                    lambda: setup.lambda,
                    snr_db: Some(snr_db),
                    iterations: result.iterations,
                    wall_time_s: start.elapsed().as_secs_f64(),
                },
                result,
            })
        })
        .collect()
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

const RUN_HEADER: &str = "seed,k,k_hat,lambda,snr_db,iterations,converged,err";

fn run_rows(runs: &[SeedRun], prefix: &str) -> String {
    let mut s = String::new();
    for r in runs {
        let e = &r.report;
        let _ = writeln!(
            s,
            "{prefix}{},{},{},{},{},{},{},{}",
            r.seed,
            e.k,
            e.k_hat,
            e.lambda,
            e.snr_db.unwrap_or(f64::INFINITY),
            e.iterations,
            r.result.converged,
            e.err
        );
    }
    s
}

fn load_optional_model(cfg: &ExperimentConfig) -> Result<Option<MlpModel>> {
    match &cfg.model {
        None => Ok(None),
        Some(p) if !p.exists() => Err(Error::invalid(format!(
            "model file {} not found; create it with `emsparse generate-dataset` followed by \
             `emsparse train --out {}`",
            p.display(),
            p.display()
        ))),
        Some(p) => load_model(p).map(Some),
    }
}

fn render_pair(setup: &Setup, run: &SeedRun, out: Option<&Path>, stem: &str, report: &mut ExperimentReport) -> Result<()> {
    if let Some(dir) = out {
        let max = setup.reference.values().iter().copied().fold(0.0, f64::max);
        let reference = dir.join(format!("{stem}_reference.pgm"));
        render_contrast(setup.reference.values(), &setup.grid, &reference, Some(max))?;
        let recon = dir.join(format!("{stem}_reconstruction.pgm"));
        let values: Vec<f64> = run.result.tau.iter().map(|z| z.re).collect();
        render_contrast(&values, &setup.grid, &recon, Some(max))?;
        report.images.push(reference);
        report.images.push(recon);
    }
    Ok(())
}

fn base_run(
    cfg: &ExperimentConfig,
    setup: &Setup,
    model: Option<&MlpModel>,
    out: Option<&Path>,
    report: &mut ExperimentReport,
) -> Result<()> {
    let name = cfg.name.name();
    let runs = run_seeds(cfg, setup, model, cfg.snr_db, 0)?;
    let mean_err = mean(runs.iter().map(|r| r.report.err));
    let mut t = format!("{RUN_HEADER}\n");
    t += &run_rows(&runs, "");
    let _ = writeln!(t, "mean,{},,{},{},,,{mean_err}", setup.k, setup.lambda, cfg.snr_db);
    report.tables.push((format!("{name}_err.csv"), t));
    report.summary.insert("mean_err".into(), mean_err);
    report.summary.insert("k".into(), setup.k as f64);
    report.summary.insert("lambda".into(), setup.lambda);
    render_pair(setup, &runs[0], out, name, report)
}

fn k_sweep(
    cfg: &ExperimentConfig,
    setup: &Setup,
    model: Option<&MlpModel>,
    report: &mut ExperimentReport,
) -> Result<()> {
    let name = cfg.name.name();
    let mut detail = format!("k_offset,{RUN_HEADER}\n");
    let mut summary = String::from("k_offset,k_hat_exact,mean_err\n");
    for &off in &cfg.sweeps.k_offsets {
        let runs = run_seeds(cfg, setup, model, cfg.snr_db, off)?;
        detail += &run_rows(&runs, &format!("{off},"));
        let m = mean(runs.iter().map(|r| r.report.err));
        let _ = writeln!(summary, "{off},{},{m}", (setup.k as i64 + off).max(0));
        report.summary.insert(format!("k_offset_{off}"), m);
    }
    report.tables.push((format!("{name}_khat_sweep.csv"), detail));
    report.tables.push((format!("{name}_khat_mean.csv"), summary));
    Ok(())
}

fn sensor_sweep(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let name = cfg.name.name();
    let mut detail = format!("n_t,n_r,{RUN_HEADER}\n");
    let mut summary = String::from("n_t,n_r,n_measurements,mean_err\n");
    for &n in &cfg.sweeps.sensor_counts {
        let sensors = SensorConfig {
            n_transmitters: n,
            n_receivers: n,
            radius: cfg.sensors.radius,
        };
        let setup = Setup::new(cfg, &cfg.scene, sensors, cfg.frequency_hz)?;
        let runs = run_seeds(cfg, &setup, None, cfg.snr_db, 0)?;
        detail += &run_rows(&runs, &format!("{n},{n},"));
        let m = mean(runs.iter().map(|r| r.report.err));
        let _ = writeln!(summary, "{n},{n},{},{m}", n * n);
        report.summary.insert(format!("sensors_{n}"), m);
    }
    report.tables.push((format!("{name}_sensors.csv"), detail));
    report.tables.push((format!("{name}_sensors_mean.csv"), summary));
    Ok(())
}

fn snr_sweep(cfg: &ExperimentConfig, setup: &Setup, out: Option<&Path>, report: &mut ExperimentReport) -> Result<()> {
    let name = cfg.name.name();
    let mut detail = format!("{RUN_HEADER}\n");
    let mut summary = String::from("snr_db,mean_err\n");
    for &snr in &cfg.sweeps.snr_db {
        let runs = run_seeds(cfg, setup, None, snr, 0)?;
        detail += &run_rows(&runs, "");
        let m = mean(runs.iter().map(|r| r.report.err));
        let _ = writeln!(summary, "{snr},{m}");
        report.summary.insert(format!("snr_{snr}"), m);
    }
    report.tables.push((format!("{name}_snr_sweep.csv"), detail));
    report.tables.push((format!("{name}_snr_mean.csv"), summary));
    let runs = run_seeds(cfg, setup, None, cfg.snr_db, 0)?;
    report.summary.insert("mean_err".into(), mean(runs.iter().map(|r| r.report.err)));
    render_pair(setup, &runs[0], out, name, report)
}

fn frequency_sweep(cfg: &ExperimentConfig, model: &MlpModel, report: &mut ExperimentReport) -> Result<()> {
    let name = cfg.name.name();
    let mut detail = String::from("frequency_hz,seed,k,k_hat,abs_error\n");
    let mut summary = String::from("frequency_hz,mean_abs_error\n");
    for &f in &cfg.sweeps.frequencies_hz {
        let grid = Grid::new(cfg.grid.side_length, cfg.grid.n_side)?;
        let medium = BackgroundMedium::vacuum(f)?;
        let layout = place_sensors(
            cfg.sensors.n_transmitters,
            cfg.sensors.n_receivers,
            cfg.sensors.radius,
            &grid,
        )?;
        let reference = rasterize_scene(&cfg.scene, &grid)?;
        let k = sparsity(&reference);
        let clean = simulate_scattered_field(&reference, &grid, &layout, &medium)?;
        let mut errs = Vec::new();
        for &seed in &cfg.seeds {
            let meas = add_awgn(&clean, cfg.snr_db, seed)?;
            let k_hat = predict(model, &meas)?.k_hat(grid.len());
            let e = k.abs_diff(k_hat);
            errs.push(e as f64);
            let _ = writeln!(detail, "{f},{seed},{k},{k_hat},{e}");
        }
        let m = mean(errs);
        let _ = writeln!(summary, "{f},{m}");
        report.summary.insert(format!("freq_{f}"), m);
    }
    report.tables.push((format!("{name}_frequency.csv"), detail));
    report.tables.push((format!("{name}_frequency_mean.csv"), summary));
    Ok(())
}

/// Runs the experiment named in `cfg`. Images are written only when `out` is
/// given; tables are always returned and also written to `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport {
        name: cfg.name.name().into(),
        ..Default::default()
    };
    let model = load_optional_model(cfg)?;
    match cfg.name {
        ExperimentKind::Fig2f => {
            let m = model.as_ref().ok_or_else(|| {
                Error::invalid(
                    "fig2f needs `model` in its config; train one with `emsparse train` first",
                )
            })?;
            frequency_sweep(cfg, m, &mut report)?;
        }
        ExperimentKind::Fig3 => {
            let setup = Setup::new(cfg, &cfg.scene, cfg.sensors, cfg.frequency_hz)?;
            snr_sweep(cfg, &setup, out, &mut report)?;
        }
        ExperimentKind::Fig4 | ExperimentKind::Fig5 | ExperimentKind::Fig6 => {
            let setup = Setup::new(cfg, &cfg.scene, cfg.sensors, cfg.frequency_hz)?;
            base_run(cfg, &setup, model.as_ref(), out, &mut report)?;
            if !cfg.sweeps.k_offsets.is_empty() {
                k_sweep(cfg, &setup, model.as_ref(), &mut report)?;
            }
            if !cfg.sweeps.sensor_counts.is_empty() {
                sensor_sweep(cfg, &mut report)?;
            }
        }
    }
    if let Some(dir) = out {
        report.write_tables(dir)?;
    }
    Ok(report)
}

/// Mean err on the held-out tuning scene for every candidate
/// `lambda / sigma_max(H^H H)`; returns the table and the best candidate.
pub fn tune_lambda(cfg: &ExperimentConfig) -> Result<(String, f64)> {
    let tuning = cfg
        .tuning
        .as_ref()
        .ok_or_else(|| Error::invalid("config has no [tuning] section"))?;
    if tuning.candidates.is_empty() || tuning.seeds.is_empty() {
        return Err(Error::invalid("tuning needs candidates and seeds"));
    }
    let mut base = cfg.clone();
    base.lambda_rel = 0.0;
    base.seeds = tuning.seeds.clone();
    let setup = Setup::new(&base, &tuning.scene, cfg.sensors, cfg.frequency_hz)?;
    let smax = gram_spectral_radius(setup.operator.matrix());
    let mut table = String::from("lambda_rel,lambda,mean_err\n");
    let mut best = (f64::INFINITY, tuning.candidates[0]);
    for &rel in &tuning.candidates {
        let mut trial = base.clone();
        trial.lambda_rel = rel;
        let s = Setup {
            lambda: rel * smax,
            ..Setup::new(&trial, &tuning.scene, cfg.sensors, cfg.frequency_hz)?
        };
        let runs = run_seeds(&trial, &s, None, cfg.snr_db, 0)?;
        let m = mean(runs.iter().map(|r| r.report.err));
        let _ = writeln!(table, "{rel},{},{m}", rel * smax);
        if m < best.0 {
            best = (m, rel);
        }
    }
    Ok((table, best.1))
}
