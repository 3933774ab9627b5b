//! Command-line front end.
//!
//! Exit codes: 0 success, 1 oracle residual violation, 2 unreadable or
//! malformed config (and usage errors), 3 domain errors, including bad count
//! files and failed writes.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::circuit::{oracle_suite, OracleReport};
use crate::harness::{error_curve_from, run_trials, ExperimentConfig};
use crate::likelihood::{likelihood_scan, mle_estimate, EstimatorConfig, Grid};
use crate::model::Schedule;
use crate::ortho::OrthoParams;
use crate::sampling::{sample_counts, CountData, CountRecord, TrueModelSpec};

/// Caps the worker thread count; takes precedence over `--threads`.
pub const THREADS_ENV: &str = "NOISY_QAE_THREADS";
/// Residual above which the oracle check fails.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "noisy-qae",
    version,
    about = "Amplitude estimation under unknown circuit noise"
)]
struct Cli {
    /// Seed for simulated data; overrides any seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (scan, estimate, oracle-check) or directory (campaign).
    /// Files default to standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Profile log-likelihood on a theta grid, as CSV `theta,loglik`.
    Scan(ConfigArg),
    /// Maximum-likelihood estimate from a count file or simulated data.
    Estimate(EstimateArgs),
    /// Monte Carlo error curve over schedule prefixes.
    Campaign(ConfigArg),
    /// Density-matrix check of the closed-form probabilities.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON config file.
    config: PathBuf,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    config: PathBuf,
    /// JSON count record `{"grover_ones": [...], "ancillary_ones": [...]}`.
    #[arg(
        long,
        conflicts_with = "simulate",
        required_unless_present = "simulate"
    )]
    counts: Option<PathBuf>,
    /// Sample counts from the config's true model instead.
    #[arg(long)]
    simulate: bool,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Index qubits.
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Depolarizing probability per operator application.
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    #[arg(long, default_value_t = 16)]
    m_max: u32,
    #[arg(long, hide = true)]
    corrupt: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub schedule: Schedule,
    pub true_model: TrueModelSpec,
    pub c: OrthoParams,
    #[serde(default = "default_grid")]
    pub grid: Grid,
    #[serde(default)]
    pub seed: u64,
}

fn default_grid() -> Grid {
    Grid::full(EstimatorConfig::default().grid_points)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub schedule: Schedule,
    pub c: OrthoParams,
    /// Required with `--simulate`.
    #[serde(default)]
    pub true_model: Option<TrueModelSpec>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct EstimateOutput<'a> {
    theta_hat: f64,
    loglik: f64,
    degenerate: bool,
    seed: Option<u64>,
    config: &'a EstimateConfig,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    master_seed: u64,
    config: &'a ExperimentConfig,
    started_unix: u64,
    finished_unix: u64,
    outputs: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Domain(String),
    Oracle(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Oracle(_) => 1,
            Failure::Config(_) => 2,
            Failure::Domain(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Domain(m) | Failure::Oracle(m) => m,
        }
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| Failure::Domain(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| Failure::Domain(format!("cannot write output: {e}"))),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Thread count from the environment cap, else `--threads`.
fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                Failure::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                ))
            }),
        Err(_) => Ok(flag.filter(|&n| n > 0)),
    }
}

fn cmd_scan(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let config: ScanConfig = read_config(path)?;
    config.true_model.validate(&config.schedule)?;
    config.c.check_len(&config.schedule)?;
    let seed = cli.seed.unwrap_or(config.seed);
    let counts = sample_counts(&config.true_model, &config.schedule, seed)?;
    let scan = likelihood_scan(&counts, &config.c, config.grid)?;
    let mut csv = String::from("theta,loglik\n");
    for (theta, value) in scan {
        writeln!(csv, "{theta},{value}").unwrap();
    }
    write_output(cli.output.as_deref(), &csv)
}

fn cmd_estimate(cli: &Cli, args: &EstimateArgs) -> Result<(), Failure> {
    let mut config: EstimateConfig = read_config(&args.config)?;
    config.c.check_len(&config.schedule)?;
    let (counts, seed) = match &args.counts {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Domain(format!("cannot read {}: {e}", path.display())))?;
            let record: CountRecord = serde_json::from_str(&text).map_err(|e| {
                Failure::Domain(format!("invalid counts in {}: {e}", path.display()))
            })?;
            (
                CountData::from_record(config.schedule.clone(), record)?,
                None,
            )
        }
        None => {
            let model = config.true_model.as_ref().ok_or_else(|| {
                Failure::Config("--simulate needs `true_model` in the config".into())
            })?;
            model.validate(&config.schedule)?;
            let seed = cli.seed.unwrap_or(config.seed);
            config.seed = seed;
            (sample_counts(model, &config.schedule, seed)?, Some(seed))
        }
    };
    let result = mle_estimate(&counts, &config.c, config.estimator)?;
    let out = EstimateOutput {
        theta_hat: result.theta_hat,
        loglik: result.log_likelihood_at_max,
        degenerate: result.degenerate,
        seed,
        config: &config,
    };
    write_output(cli.output.as_deref(), &to_json(&out))
}

fn cmd_campaign(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let started_unix = unix_now();
    let mut config: ExperimentConfig = read_config(path)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let dir = cli
        .output
        .as_deref()
        .ok_or_else(|| Failure::Config("campaign needs --output <dir>".into()))?;
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Domain(format!("cannot create {}: {e}", dir.display())))?;

    let trials = run_trials(&config)?;
    let curve = error_curve_from(&config, &trials)?;

    let mut csv = String::from(
        "prefix,n_queries,rmse,crlb_model,crlb_classical,crlb_noiseless,n_trials,n_degenerate\n",
    );
    for r in &curve.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.prefix,
            r.n_queries,
            r.rmse,
            r.crlb_model,
            r.crlb_classical,
            r.crlb_noiseless,
            r.n_trials,
            r.n_degenerate
        )
        .unwrap();
    }
    let mut per_trial = String::from("trial,theta_hat,loglik,degenerate\n");
    for t in &trials {
        writeln!(
            per_trial,
            "{},{},{},{}",
            t.trial, t.result.theta_hat, t.result.log_likelihood_at_max, t.result.degenerate
        )
        .unwrap();
    }

    let curve_path = dir.join("error_curve.csv");
    let trials_path = dir.join("trials.csv");
    write_output(Some(&curve_path), &csv)?;
    write_output(Some(&trials_path), &per_trial)?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        master_seed: config.master_seed,
        config: &config,
        started_unix,
        finished_unix: unix_now(),
        outputs: vec![
            curve_path.display().to_string(),
            trials_path.display().to_string(),
        ],
    };
    write_output(Some(&dir.join("manifest.json")), &to_json(&manifest))
}

fn cmd_oracle_check(cli: &Cli, args: &OracleArgs) -> Result<(), Failure> {
    let report: OracleReport = oracle_suite(
        args.n,
        args.lambda,
        args.m_max,
        cli.seed.unwrap_or(0),
        args.corrupt,
    )?;
    let text = format!(
        "grover_residual {:e}\nancillary_residual {:e}\nidentity_residual {:e}\ntrace_error {:e}\nmin_eigenvalue {:e}\n",
        report.grover_residual,
        report.ancillary_residual,
        report.identity_residual,
        report.trace_error,
        report.min_eigenvalue
    );
    match cli.output.as_deref() {
        Some(p) => write_output(Some(p), &to_json(&report))?,
        None => print!("{text}"),
    }
    if report.max_residual() < ORACLE_TOLERANCE {
        Ok(())
    } else {
        Err(Failure::Oracle(format!(
            "residual {:e} exceeds {ORACLE_TOLERANCE:e}",
            report.max_residual()
        )))
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = thread_count(cli.threads)? {
        // Only the first pool wins; later calls in the same process are no-ops.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match &cli.command {
        Command::Scan(a) => cmd_scan(cli, &a.config),
        Command::Estimate(a) => cmd_estimate(cli, a),
        Command::Campaign(a) => cmd_campaign(cli, &a.config),
        Command::OracleCheck(a) => cmd_oracle_check(cli, a),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}
