//! Command-line front end: estimation, CLT and consistency experiments,
//! CAT certification, and the geometry self test.
//!
//! Exit codes: 0 success, 1 acceptance-threshold failure, 2 configuration
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use mest_core::error::Error;
use mest_core::estimator::EstimatorConfig;
use mest_core::geometry::{Point, SpaceSpec};
use mest_core::harness::{
    self, cat_suite, config_hash, manifest_path, persist_json, selftest, ExperimentConfig,
    RunManifest,
};
use mest_core::loss::LossSpec;

#[derive(Parser)]
#[command(name = "mest", version, about = "M-estimation on geodesic spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the empirical objective over a supplied dataset.
    Estimate(EstimateArgs),
    /// Replicated CLT experiment against the sandwich covariance.
    Clt(ExperimentArgs),
    /// Median-error consistency curve over a grid of sample sizes.
    Consistency(ExperimentArgs),
    /// Random-triangle CAT(kappa) certification.
    CatCheck(CatArgs),
    /// Geometry property suite (roundtrip, isometry, geodesic speed).
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Space spec JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Loss spec JSON file.
    #[arg(long)]
    loss: PathBuf,
    /// Data file: {"points": [[...], ...]}.
    #[arg(long)]
    data: PathBuf,
    /// Estimator config JSON file (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Override the config's replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write per-replication error rows as CSV.
    #[arg(long)]
    errors_csv: Option<PathBuf>,
}

#[derive(Args)]
struct CatArgs {
    /// Space spec JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Curvature bound to certify against.
    #[arg(long)]
    kappa: f64,
    #[arg(long, default_value_t = 100)]
    triangles: usize,
    /// Radius of the sampling ball around the space's origin.
    #[arg(long, default_value_t = 0.5)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Space spec JSON file.
    #[arg(long)]
    space: PathBuf,
    /// Number of random cases.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct DataFile {
    points: Vec<Point>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> mest_core::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// 2 for configuration problems, 1 for everything else.
fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::InvalidConfig(_)
        | Error::InvalidSpace(_)
        | Error::InvalidPoint(_)
        | Error::InvalidTangent(_)
        | Error::SpaceMismatch(_)
        | Error::Io(_)
        | Error::Json(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn run() -> Result<ExitCode, Error> {
    match Cli::parse().command {
        Command::Estimate(a) => {
            let job = mest_core::harness::EstimateJob {
                space: read_json::<SpaceSpec>(&a.space)?,
                loss: read_json::<LossSpec>(&a.loss)?,
                points: read_json::<DataFile>(&a.data)?.points,
                estimator: match &a.config {
                    Some(p) => read_json::<EstimatorConfig>(p)?,
                    None => EstimatorConfig::default(),
                },
            };
            let result = harness::run_persisted(&job, 0, &a.out, None, || {
                Ok((job.run()?, Vec::new()))
            })?;
            println!(
                "estimate: objective {:.6e}, grad norm {:.3e}, {} iterations, converged: {}",
                result.objective, result.grad_norm, result.iters, result.converged
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Clt(a) => {
            let config = load_experiment(&a)?;
            let report = harness::run_persisted(
                &config,
                config.seed,
                &a.out,
                a.errors_csv.as_deref(),
                || {
                    let r = config.run_clt()?;
                    let errors = r.errors.clone();
                    Ok((r, errors))
                },
            )?;
            println!(
                "clt: n {} reps {} frobenius_rel_err {:.4} mahalanobis_ks {:.4} mean_norm {:.4}",
                report.n, report.reps, report.frobenius_rel_err, report.mahalanobis_ks,
                report.mean_norm
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Consistency(a) => {
            let config = load_experiment(&a)?;
            let table = harness::run_persisted(
                &config,
                config.seed,
                &a.out,
                a.errors_csv.as_deref(),
                || {
                    let t = config.run_consistency()?;
                    let rows: Vec<Vec<f64>> = t
                        .rows
                        .iter()
                        .map(|r| vec![r.n as f64, r.median_error, r.failures as f64])
                        .collect();
                    Ok((t, rows))
                },
            )?;
            for row in &table.rows {
                println!("consistency: n {:>7} median error {:.6e}", row.n, row.median_error);
            }
            println!("consistency: log-log slope {:.4}", table.slope);
            Ok(ExitCode::SUCCESS)
        }
        Command::CatCheck(a) => {
            let space: SpaceSpec = read_json(&a.space)?;
            let report = cat_suite(&space, a.kappa, a.triangles, a.scale, a.seed)?;
            if let Some(out) = &a.out {
                persist_and_manifest(&(&a.kappa, &a.triangles, &a.seed), a.seed, out, &report)?;
            }
            println!(
                "cat-check: kappa {} checked {} skipped {} violations {} max excess {:.3e}",
                report.kappa, report.reports.len(), report.skipped, report.violations,
                report.max_excess
            );
            if report.violations > 0 {
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest(a) => {
            let space: SpaceSpec = read_json(&a.space)?;
            let report = selftest(&space, a.n, a.seed)?;
            if let Some(out) = &a.out {
                persist_and_manifest(&(&a.n, &a.seed), a.seed, out, &report)?;
            }
            println!(
                "selftest: {} cases, roundtrip {:.3e}, transport {:.3e}, speed {:.3e}, \
                 triangle {:.3e}, midpoint {:.3e}, pass: {}",
                report.cases, report.max_roundtrip, report.max_transport_isometry,
                report.max_speed_dev, report.max_triangle_defect, report.max_midpoint_dev,
                report.pass
            );
            if !report.pass {
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_experiment(a: &ExperimentArgs) -> mest_core::Result<ExperimentConfig> {
    let mut config: ExperimentConfig = read_json(&a.config)?;
    if let Some(n) = a.n {
        config.n = Some(n);
    }
    if let Some(reps) = a.reps {
        config.reps = reps;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn persist_and_manifest<C: serde::Serialize, T: serde::Serialize>(
    config: &C,
    seed: u64,
    out: &Path,
    report: &T,
) -> mest_core::Result<()> {
    let start = std::time::Instant::now();
    persist_json(out, report)?;
    let manifest = RunManifest {
        config_hash: config_hash(config)?,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    persist_json(&manifest_path(out), &manifest)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
