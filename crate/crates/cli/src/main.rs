use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use emsparse::cosamp::{cosamp_reconstruct, CosampConfig};
use emsparse::dataset::{build_dataset, manifest_hash, Dataset, DatasetSpec, Split};
use emsparse::experiments::{run_experiment, tune_lambda, ExperimentConfig};
use emsparse::forward::born_operator;
use emsparse::io::{load_operator, save_operator, write_file};
use emsparse::linalg::gram_spectral_radius;
use emsparse::measurements::{synthesize_measurements, MeasurementSet};
use emsparse::metrics::{khat_histogram, reconstruction_error, render_contrast};
use emsparse::net::{load_model, predict, predict_k, save_model, train_on_dataset, TrainConfig};
use emsparse::rip::{ric_bound, rip_diagnostics};
use emsparse::scene::{rasterize_scene, SceneConfig};

/// Sparse microwave imaging: simulation, sparsity estimation and CoSaMP
/// reconstruction.
#[derive(Parser)]
#[command(name = "emsparse", version)]
struct Cli {
    /// Seed overriding the one in the config, where a command uses one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config file (scene, dataset spec or experiment, depending on command).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise noisy measurements for the scene in --config.
    Simulate,
    /// Assemble the Born scattering operator for the setup in --config.
    BuildOperator,
    /// Generate a training dataset directory.
    GenerateDataset(GenerateArgs),
    /// Train the sparsity estimator on a dataset directory.
    Train(TrainArgs),
    /// Estimate the sparsity level of a measurement file.
    PredictK(PredictArgs),
    /// Reconstruct a contrast vector with CoSaMP.
    Reconstruct(ReconstructArgs),
    /// Run a scripted experiment (fig2f, fig3, fig4, fig5, fig6).
    Experiment(ExperimentArgs),
    /// Sweep lambda on the held-out scene of an experiment config.
    TuneLambda,
    /// Extreme eigenvalues of the Gram matrix with and without the shift.
    RipCheck(RipArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Dataset spec (TOML); defaults to --config.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Number of scenarios; defaults to the size fixed by the spec.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    meas: PathBuf,
    /// Number of grid cells.
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    operator: PathBuf,
    #[arg(long)]
    meas: PathBuf,
    /// Sparsity level, or `auto` to take it from --model.
    #[arg(long)]
    k: String,
    /// Absolute Tikhonov shift.
    #[arg(long, conflicts_with = "lambda_rel")]
    lambda: Option<f64>,
    /// Shift relative to the largest eigenvalue of the Gram matrix.
    #[arg(long)]
    lambda_rel: Option<f64>,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Scene config; when given, err against its rasterised contrast is
    /// reported and images are written.
    #[arg(long)]
    scene: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    name: String,
}

#[derive(Args)]
struct RipArgs {
    /// Operator file; otherwise it is assembled from --config.
    #[arg(long)]
    operator: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    p.as_deref().with_context(|| format!("missing {flag}"))
}

fn scene_config(cli: &Cli) -> anyhow::Result<SceneConfig> {
    let mut cfg = SceneConfig::read(need(&cli.config, "--config")?)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn simulate(cli: &Cli) -> anyhow::Result<()> {
    let cfg = scene_config(cli)?;
    let grid = cfg.grid()?;
    let sensors = cfg.sensors(&grid)?;
    let meas = synthesize_measurements(&cfg.scene, &grid, &sensors, &cfg.medium()?, cfg.snr_db, cfg.seed)?;
    meas.write(need(&cli.out, "--out")?)?;
    Ok(())
}

fn build_operator(cli: &Cli) -> anyhow::Result<()> {
    let cfg = scene_config(cli)?;
    let grid = cfg.grid()?;
    let op = born_operator(&grid, &cfg.sensors(&grid)?, &cfg.medium()?)?;
    save_operator(need(&cli.out, "--out")?, &op)?;
    Ok(())
}

fn generate(cli: &Cli, a: &GenerateArgs) -> anyhow::Result<()> {
    let spec_path = a.spec.as_ref().or(cli.config.as_ref()).context("missing --spec")?;
    let spec = DatasetSpec::read(spec_path)?;
    let count = match (a.count, spec.natural_count()) {
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => bail!("--count is required for random datasets"),
    };
    let data = build_dataset(&spec, count, cli.seed.unwrap_or(0))?;
    data.save(need(&cli.out, "--out")?)?;
    Ok(())
}

/// Writes the model plus `<model>.loss.csv` and `<model>.test_hist.csv`.
fn train(cli: &Cli, a: &TrainArgs) -> anyhow::Result<()> {
    let out = need(&cli.out, "--out")?;
    let data = Dataset::load(&a.dataset)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: cli.seed.unwrap_or(0),
        ..TrainConfig::default()
    };
    let (model, curve) = train_on_dataset(&data, &manifest_hash(&a.dataset)?, &cfg)?;
    save_model(out, &model)?;

    let mut loss = String::from("epoch,loss\n");
    for (e, l) in curve.iter().enumerate() {
        let _ = writeln!(loss, "{e},{l}");
    }
    write_file(&sibling(out, "loss.csv"), loss.as_bytes())?;

    let test = data.part(Split::Test);
    if !test.is_empty() {
        let scale = model.feature_scale.unwrap_or(1.0);
        let pairs = test
            .iter()
            .map(|s| {
                let x = s.features.iter().map(|v| v * scale).collect::<Vec<_>>();
                Ok((s.k, model.forward_pass(&x)?.k_hat(s.n)))
            })
            .collect::<emsparse::Result<Vec<_>>>()?;
        write_file(&sibling(out, "test_hist.csv"), khat_histogram(&pairs)?.to_csv().as_bytes())?;
    }
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn predict_cmd(cli: &Cli, a: &PredictArgs) -> anyhow::Result<()> {
    let model = load_model(&a.model)?;
    let meas = MeasurementSet::read(&a.meas)?;
    let p = predict(&model, &meas.values)?;
    let k_hat = predict_k(&model, &meas, a.n)?;
    let csv = format!("k_hat,k_norm,contrast_est\n{k_hat},{},{}\n", p.k_norm, p.contrast_est);
    match &cli.out {
        Some(out) => write_file(out, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

/// Writes `tau.csv` and `summary.csv` into the --out directory.
fn reconstruct(cli: &Cli, a: &ReconstructArgs) -> anyhow::Result<()> {
    let out = need(&cli.out, "--out")?;
    let op = load_operator(&a.operator)?;
    let meas = MeasurementSet::read(&a.meas)?;
    let k = if a.k == "auto" {
        let model = load_model(a.model.as_deref().context("--k auto needs --model")?)?;
        predict_k(&model, &meas, op.ncols())?
    } else {
        a.k.parse().with_context(|| format!("--k must be an integer or `auto`, got {:?}", a.k))?
    };
    let lambda = match (a.lambda, a.lambda_rel) {
        (Some(l), _) => l,
        (None, Some(r)) => r * gram_spectral_radius(op.matrix()),
        (None, None) => 0.0,
    };
    let cfg = CosampConfig {
        k,
        lambda,
        max_iterations: a.max_iter,
        stop_tol: a.tol,
    };
    let r = cosamp_reconstruct(&op, &meas.values, &cfg)?;

    let mut tau = String::from("index,re,im\n");
    for (i, z) in r.tau.iter().enumerate() {
        let _ = writeln!(tau, "{i},{},{}", z.re, z.im);
    }
    write_file(&out.join("tau.csv"), tau.as_bytes())?;

    let mut err = String::new();
    if let Some(scene) = &a.scene {
        let sc = SceneConfig::read(scene)?;
        let grid = sc.grid()?;
        let reference = rasterize_scene(&sc.scene, &grid)?;
        let values: &[Complex64] = r.tau.as_slice();
        err = reconstruction_error(values, reference.values())?.to_string();
        let max = reference.values().iter().copied().fold(0.0, f64::max);
        render_contrast(&r.real_part(), &grid, &out.join("reconstruction.pgm"), Some(max))?;
        render_contrast(reference.values(), &grid, &out.join("reference.pgm"), Some(max))?;
    }
    let summary = format!(
        "k_hat,lambda,iterations,converged,final_residual,err\n{k},{lambda},{},{},{},{err}\n",
        r.iterations,
        r.converged,
        r.residual_history.last().copied().unwrap_or(f64::NAN)
    );
    write_file(&out.join("summary.csv"), summary.as_bytes())?;
    Ok(())
}

fn experiment_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::read(need(&cli.config, "--config")?)?;
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> anyhow::Result<()> {
    let cfg = experiment_config(cli)?;
    if cfg.name.name() != a.name {
        bail!(emsparse::Error::InvalidArgument(format!(
            "--name {} does not match the config's experiment {}",
            a.name,
            cfg.name.name()
        )));
    }
    let out = need(&cli.out, "--out")?;
    let report = run_experiment(&cfg, Some(out))?;
    let mut summary = String::from("key,value\n");
    for (k, v) in &report.summary {
        let _ = writeln!(summary, "{k},{v}");
    }
    write_file(&out.join(format!("{}_summary.csv", report.name)), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn tune(cli: &Cli) -> anyhow::Result<()> {
    let cfg = experiment_config(cli)?;
    let (table, best) = tune_lambda(&cfg)?;
    match &cli.out {
        Some(out) => write_file(out, table.as_bytes())?,
        None => print!("{table}"),
    }
    eprintln!("best lambda_rel = {best}");
    Ok(())
}

fn rip_check(cli: &Cli, a: &RipArgs) -> anyhow::Result<()> {
    let op = match &a.operator {
        Some(p) => load_operator(p)?,
        None => {
            let cfg = scene_config(cli)?;
            let grid = cfg.grid()?;
            born_operator(&grid, &cfg.sensors(&grid)?, &cfg.medium()?)?
        }
    };
    let d = rip_diagnostics(&op, a.lambda)?;
    let (lo, hi) = d.singular_values();
    let (slo, shi) = d.shifted_singular_values();
    let csv = format!(
        "lambda,gram_min,gram_max,gram_ratio,shifted_min,shifted_max,shifted_ratio,ric_bound,shifted_ric_bound\n\
         {},{},{},{},{},{},{},{},{}\n",
        d.lambda,
        d.gram_min,
        d.gram_max,
        d.gram_ratio(),
        d.shifted_min,
        d.shifted_max,
        d.shifted_ratio(),
        ric_bound(lo, hi),
        ric_bound(slo, shi)
    );
    match &cli.out {
        Some(out) => write_file(out, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate => simulate(cli),
        Command::BuildOperator => build_operator(cli),
        Command::GenerateDataset(a) => generate(cli, a),
        Command::Train(a) => train(cli, a),
        Command::PredictK(a) => predict_cmd(cli, a),
        Command::Reconstruct(a) => reconstruct(cli, a),
        Command::Experiment(a) => experiment(cli, a),
        Command::TuneLambda => tune(cli),
        Command::RipCheck(a) => rip_check(cli, a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<emsparse::Error>() {
        Some(e) if e.is_validation() => 2,
        Some(emsparse::Error::SolverFailure { .. }) => 3,
        Some(_) => 1,
        // Missing flags and unparsable values are usage errors.
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
