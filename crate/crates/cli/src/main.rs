//! Command-line front end: simulation runs, single-dataset paths, comparison
//! and oracle reports, the verification suite, and CSV ingestion.
//!
//! Exit codes: 0 on success, 1 when `verify` finds violations, 2 on
//! input/config errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ridgepath_core::error::Error;
use ridgepath_core::experiments::{
    export, export_comparisons, export_oracles, export_plot_data, run_comparisons, run_oracles,
    run_paths, SimConfig,
};
use ridgepath_core::ingest::{criterion_paths, export_criteria, IngestConfig};
use ridgepath_core::rng::GENERATOR_NAME;
use ridgepath_core::util::init_thread_cap_from_env;
use ridgepath_core::verify::run_suite;
use ridgepath_core::{data, Parallelism};

#[derive(Parser)]
#[command(
    name = "ridgepath",
    version,
    about = "Regularisation paths and risk comparisons for ridge regression, gradient methods and conjugate gradients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo simulation and export aggregated path records.
    Simulate(SimArgs),
    /// Compute one dataset's regularisation paths (a single replicate).
    Path(SimArgs),
    /// Emit per-replicate main-bound comparison records.
    Compare(SimArgs),
    /// Emit per-replicate path-oracle comparisons.
    Oracle(SimArgs),
    /// Run the identity and inequality suite; nonzero exit on any violation.
    Verify(SimArgs),
    /// Load a CSV dataset and emit held-out criterion paths.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Config file in flat `key = value` form; built-in smoke config when
    /// omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set n=200` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Also write plot data with quadratic-scale x positions.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the response column; all other numeric columns are features.
    #[arg(long)]
    response_column: String,
    /// Centre and scale every used column.
    #[arg(long)]
    standardise: bool,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Known noise variance; enables the stochastic-risk column. Never
    /// estimated from data.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of train/test splits.
    #[arg(long, default_value_t = 100)]
    splits: usize,
    /// Iteration grid size.
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    init_thread_cap_from_env();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::Config(_) | Error::Io { .. } => 2,
        Error::Numerical(_) | Error::ConditionViolated(_) => 2,
    }
}

fn load_config(args: &SimArgs) -> Result<SimConfig, Error> {
    let mut config = match &args.config {
        Some(path) => SimConfig::from_path(path)?,
        None => SimConfig::smoke(),
    };
    for kv in &args.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        config.apply_override(key.trim(), value.trim())?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(replicates) = args.replicates {
        config.replicates = replicates;
    }
    if let Some(sigma2) = args.sigma2 {
        config.sigma2 = sigma2;
    }
    if let Some(lambda) = args.lambda {
        config.lambda = lambda;
    }
    config.validate()?;
    Ok(config)
}

fn write_output(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> Result<(), Error>,
) -> Result<(), Error> {
    match out {
        Some(path) => {
            let mut file = std::fs::File::create(path).map_err(|e| Error::Io {
                path: path.into(),
                source: e,
            })?;
            write(&mut file)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate(args) => {
            let config = load_config(&args)?;
            simulate(&config, &args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Path(args) => {
            let mut config = load_config(&args)?;
            config.replicates = 1;
            simulate(&config, &args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare(args) => {
            let config = load_config(&args)?;
            let rows = run_comparisons(&config, Parallelism::default())?;
            let violations = rows.iter().filter(|r| !r.record.satisfied).count();
            write_output(args.out.as_deref(), |w| {
                export_comparisons(&rows, &config.metadata_lines(), w)
            })?;
            if violations > 0 {
                eprintln!("{violations} comparison record(s) violated the bound");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle(args) => {
            let config = load_config(&args)?;
            let rows = run_oracles(&config, Parallelism::default())?;
            write_output(args.out.as_deref(), |w| {
                export_oracles(&rows, &config.metadata_lines(), w)
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let config = load_config(&args)?;
            let violations = run_suite(&config)?;
            if violations.is_empty() {
                println!(
                    "verify: all checks passed ({} replicates)",
                    config.replicates
                );
                Ok(ExitCode::SUCCESS)
            } else {
                for v in &violations {
                    eprintln!("verify: {v}");
                }
                eprintln!("verify: {} violation(s)", violations.len());
                Ok(ExitCode::from(1))
            }
        }
        Command::Ingest(args) => {
            let loaded =
                data::read_csv_dataset(&args.data, &args.response_column, args.standardise)?;
            if !loaded.skipped_columns.is_empty() {
                eprintln!(
                    "ingest: skipped {} non-numeric column(s): {}",
                    loaded.skipped_columns.len(),
                    loaded.skipped_columns.join(", ")
                );
            }
            let config = IngestConfig {
                lambda: args.lambda,
                sigma2: args.sigma2,
                seed: args.seed,
                splits: args.splits,
                train_fraction: args.train_fraction,
                steps: args.steps,
            };
            let records = criterion_paths(&loaded.dataset, &config)?;
            let metadata = vec![
                format!("seed = {}", config.seed),
                format!("generator = {GENERATOR_NAME}"),
                format!(
                    "ingest = file={} response={} standardise={} lambda={} splits={} steps={} train_fraction={}",
                    args.data.display(),
                    loaded.response_name,
                    args.standardise,
                    config.lambda,
                    config.splits,
                    config.steps,
                    config.train_fraction
                ),
            ];
            write_output(args.out.as_deref(), |w| {
                export_criteria(&records, &metadata, w)
            })?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn simulate(config: &SimConfig, args: &SimArgs) -> Result<(), Error> {
    let result = run_paths(config)?;
    let mut metadata = config.metadata_lines();
    metadata.push(format!("eta = {}", result.eta));
    write_output(args.out.as_deref(), |w| {
        export(&result.records, &metadata, w)
    })?;
    if let Some(path) = &args.plot_data {
        let mut file = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        export_plot_data(&result.records, &mut file)?;
    }
    let broken = result.comparisons.iter().filter(|c| !c.satisfied).count();
    if broken > 0 {
        eprintln!("simulate: {broken} main-bound grid point(s) violated");
    }
    Ok(())
}
