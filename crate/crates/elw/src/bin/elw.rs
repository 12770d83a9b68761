//! Command-line front end: estimate on CSV data, run simulation cells, and
//! reproduce the benchmark tables.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use elw::cli::{format_estimates, run_estimate, write_estimate_csv, EstimateRequest, IntervalChoice, Regime};
use elw::error::{ElwError, Result};
use elw::estimators::EstimatorKind;
use elw::simulation::{
    run_replications_detailed, write_raw_errors, DesignKind, ExampleConfig, IntervalMode,
    SimulationConfig,
};
use elw::tables::reproduce_table;

#[derive(Parser)]
#[command(
    name = "elw",
    about = "Empirical likelihood weighting for missing data and unequal probability sampling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for replicated computations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a mean from a CSV file of per-unit records.
    Estimate(EstimateArgs),
    /// Run one simulation cell and emit a metrics table.
    Simulate(SimulateArgs),
    /// Re-run the grid behind a benchmark table with reference columns.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV (header row required).
    #[arg(long)]
    input: PathBuf,
    /// Sampling regime: missing, wor, or wr.
    #[arg(long, default_value = "missing")]
    regime: String,
    /// Estimators to run (repeatable): ipw, sipw, elw, zzz, chim, mw-trim-1, mw-trim-2.
    #[arg(long = "estimator")]
    estimators: Vec<String>,
    /// Interval type: none, an, or re.
    #[arg(long, default_value = "an")]
    interval: String,
    /// Confidence level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Resampling replicates (interval = re).
    #[arg(long = "B", alias = "b", default_value_t = 1000)]
    b: usize,
    /// Resampling subsample size (default floor(sqrt(N))).
    #[arg(long = "M", alias = "m")]
    m: Option<usize>,
    /// Total unit count N (required when the file holds observed rows only).
    #[arg(long)]
    n_total: Option<usize>,
    /// RNG seed for the resampling interval.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Indicator column name.
    #[arg(long, default_value = "d")]
    d_col: String,
    /// Response column name(s) (repeatable for vector responses).
    #[arg(long = "y-col")]
    y_cols: Vec<String>,
    /// Selection probability column name.
    #[arg(long, default_value = "pi")]
    pi_col: String,
    /// Per-draw probability column name (wr regime).
    #[arg(long, default_value = "q")]
    q_col: String,
    /// Fit a logistic score on covariate columns instead of reading pi.
    #[arg(long)]
    fit_score: bool,
    /// Covariate column name(s) for --fit-score (repeatable).
    #[arg(long = "x-col")]
    x_cols: Vec<String>,
    /// Write a machine-readable CSV here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Benchmark: 1 (missing data) or 2 (survey designs).
    #[arg(long)]
    example: u8,
    /// Mean-function selector, 1..=4.
    #[arg(long)]
    model: u8,
    /// Tail index gamma (example 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Noise scale c (example 1).
    #[arg(long)]
    c: Option<f64>,
    /// Correlation rho (example 2).
    #[arg(long)]
    rho: Option<f64>,
    /// Survey design: poisson, pivotal, or pps (example 2).
    #[arg(long)]
    design: Option<String>,
    /// Population size N.
    #[arg(long, default_value_t = 2000)]
    n_total: usize,
    /// Sample size n (example 2).
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo replications.
    #[arg(long, default_value_t = 5000)]
    reps: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Estimators to run (repeatable; defaults to the benchmark's set).
    #[arg(long = "estimator")]
    estimators: Vec<String>,
    /// Intervals: none, an, re, or both.
    #[arg(long, default_value = "none")]
    interval: String,
    /// Confidence level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Resampling replicates per replication (interval = re/both).
    #[arg(long = "B", alias = "b", default_value_t = 1000)]
    b: usize,
    /// Resampling subsample size (default floor(sqrt(N))).
    #[arg(long = "M", alias = "m")]
    m: Option<usize>,
    /// Fit logistic scores instead of using the true ones (example 1).
    #[arg(long)]
    fit_score: bool,
    /// Output CSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-replicate estimation errors here (for external plots).
    #[arg(long)]
    raw_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Table id, 1..=4.
    #[arg(long)]
    table: u8,
    /// Replications per cell (default: the published 5000).
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_estimators(raw: &[String]) -> Result<Option<Vec<EstimatorKind>>> {
    if raw.is_empty() {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(raw.len());
    for s in raw {
        out.push(EstimatorKind::parse(s).ok_or_else(|| {
            ElwError::InvalidConfig(format!(
                "unknown estimator '{s}' (expected ipw, sipw, elw, zzz, chim, mw-trim-1, mw-trim-2)"
            ))
        })?);
    }
    Ok(Some(out))
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let regime = Regime::parse(&args.regime)
        .ok_or_else(|| ElwError::InvalidConfig(format!("unknown regime '{}'", args.regime)))?;
    let mut req = EstimateRequest::new(args.input, regime);
    if let Some(est) = parse_estimators(&args.estimators)? {
        req.estimators = est;
    }
    req.interval = IntervalChoice::parse(&args.interval)
        .ok_or_else(|| ElwError::InvalidConfig(format!("unknown interval '{}'", args.interval)))?;
    req.level = args.level;
    req.b = args.b;
    req.m = args.m;
    req.n_total = args.n_total;
    req.seed = args.seed;
    req.d_col = args.d_col;
    if !args.y_cols.is_empty() {
        req.y_cols = args.y_cols;
    }
    req.pi_col = args.pi_col;
    req.q_col = args.q_col;
    req.fit_score = args.fit_score;
    req.x_cols = args.x_cols;

    let outcomes = run_estimate(&req)?;
    print!("{}", format_estimates(&outcomes));
    if let Some(path) = args.out {
        let mut file = File::create(path)?;
        write_estimate_csv(&outcomes, &mut file)?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let example = match args.example {
        1 => ExampleConfig::MissingData {
            gamma: args.gamma.ok_or_else(|| ElwError::InvalidConfig("--gamma is required for example 1".into()))?,
            c: args.c.unwrap_or(1.0),
        },
        2 => {
            let design_raw = args
                .design
                .ok_or_else(|| ElwError::InvalidConfig("--design is required for example 2".into()))?;
            let design = DesignKind::parse(&design_raw)
                .ok_or_else(|| ElwError::InvalidConfig(format!("unknown design '{design_raw}'")))?;
            ExampleConfig::Survey {
                rho: args.rho.ok_or_else(|| ElwError::InvalidConfig("--rho is required for example 2".into()))?,
                design,
                n_draws: args.n.ok_or_else(|| ElwError::InvalidConfig("--n is required for example 2".into()))?,
            }
        }
        other => {
            return Err(ElwError::InvalidConfig(format!("unknown example {other}; expected 1 or 2")))
        }
    };
    let estimators = parse_estimators(&args.estimators)?
        .unwrap_or_else(|| SimulationConfig::default_estimators(&example));
    let intervals = match args.interval.to_ascii_lowercase().as_str() {
        "none" => IntervalMode::None,
        "an" | "wald" => IntervalMode::Wald,
        "re" | "resampling" => IntervalMode::Resampling { b: args.b, m: args.m },
        "both" => IntervalMode::Both { b: args.b, m: args.m },
        other => return Err(ElwError::InvalidConfig(format!("unknown interval '{other}'"))),
    };
    let config = SimulationConfig {
        example,
        model: args.model,
        n_total: args.n_total,
        reps: args.reps,
        seed: args.seed,
        estimators,
        intervals,
        level: args.level,
        fit_scores: args.fit_score,
    };
    let (table, raw) = run_replications_detailed(&config)?;
    match args.out {
        Some(path) => table.write_csv(File::create(path)?)?,
        None => table.write_csv(std::io::stdout().lock())?,
    }
    if let Some(path) = args.raw_out {
        write_raw_errors(&raw, File::create(path)?)?;
    }
    Ok(())
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<()> {
    match args.out {
        Some(path) => {
            let mut file = File::create(path)?;
            reproduce_table(args.table, args.reps, args.seed, &mut file)?;
            file.flush()?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            reproduce_table(args.table, args.reps, args.seed, &mut stdout)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| ElwError::InvalidConfig(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
