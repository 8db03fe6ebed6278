//! Command-line drivers for the `epiboot` experiments.
//!
//! Each subcommand writes a CSV of records to `--out` and a JSON sidecar
//! `<out>.meta.json` with the tool version, effective configuration, seed
//! and wall-clock time. Exit status is 0 on success, 2 for input or
//! configuration errors and 3 for numerical failures.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, RunConfig};
use crate::dataset::{parse_dataset_csv, parse_feature_csv};
use crate::error::{CliError, CliResult};
use crate::output::{write_envelope, Meta, Table};

#[derive(Debug, Parser)]
#[command(name = "epiboot", version, about = "Bootstrap estimates of epistemic uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Simulated logistic regression: bootstrap vs MCMC vs first-order MI.
    Teaser,
    /// Bootstrap MI for each test row.
    Estimate(DataArgs),
    /// Split ensemble MI into training-seed and resampling components.
    Decompose(DataArgs),
    /// Convergence table over a grid of sample sizes.
    Asymptotic,
    /// Active learning on a Gaussian-mixture pool, with a random baseline.
    Active,
    /// Influence-function approximation of the bootstrap vs refitting.
    Influence(DataArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Training CSV with a `label` column.
    #[arg(long)]
    pub train: PathBuf,
    /// Test CSV; the `label` column is optional.
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// logistic, softmax or mlp.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Number of bootstrap replicates B.
    #[arg(long, global = true)]
    pub bootstrap: Option<usize>,
    /// Number of training seeds S.
    #[arg(long, global = true)]
    pub seeds: Option<usize>,
    /// dirichlet or multinomial.
    #[arg(long, global = true)]
    pub weights: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long = "n-grid", global = true)]
    pub n_grid: Option<String>,
    #[arg(long = "mcmc-steps", global = true)]
    pub mcmc_steps: Option<usize>,
    #[arg(long, global = true)]
    pub damping: Option<f64>,
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Record CSV path; metadata goes to `<out>.meta.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// File of `key=value` lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

impl Sub {
    pub fn command(&self) -> Command {
        match self {
            Sub::Teaser => Command::Teaser,
            Sub::Estimate(_) => Command::Estimate,
            Sub::Decompose(_) => Command::Decompose,
            Sub::Asymptotic => Command::Asymptotic,
            Sub::Active => Command::Active,
            Sub::Influence(_) => Command::Influence,
        }
    }
}

/// Defaults, then the config file, then flags.
pub fn effective_config(command: Command, flags: &Flags) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::defaults(command);
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    let mut set = |key: &str, value: Option<String>| match value {
        Some(v) => cfg.set(key, &v),
        None => Ok(()),
    };
    set("seed", flags.seed.map(|v| v.to_string()))?;
    set("model", flags.model.clone())?;
    set("bootstrap", flags.bootstrap.map(|v| v.to_string()))?;
    set("seeds", flags.seeds.map(|v| v.to_string()))?;
    set("weights", flags.weights.clone())?;
    set("n-grid", flags.n_grid.clone())?;
    set("mcmc-steps", flags.mcmc_steps.map(|v| v.to_string()))?;
    set("damping", flags.damping.map(|v| v.to_string()))?;
    set("budget", flags.budget.map(|v| v.to_string()))?;
    set("out", flags.out.as_ref().map(|p| p.display().to_string()))?;
    Ok(cfg)
}

/// Runs a parsed command line and writes its outputs.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let started = Instant::now();
    let cfg = effective_config(cli.command.command(), &cli.flags)?;
    let mut warnings = Vec::new();
    let mut load = |args: &DataArgs| -> CliResult<_> {
        let train = parse_dataset_csv(&args.train)?;
        warnings.extend(train.warnings);
        let test = parse_feature_csv(&args.test)?;
        Ok((train.data, test))
    };
    let (table, failure): (Table, Option<CliError>) = match &cli.command {
        Sub::Teaser => (commands::teaser(&cfg)?.1, None),
        Sub::Asymptotic => (commands::asymptotic(&cfg)?.1, None),
        Sub::Estimate(args) => {
            let (train, test) = load(args)?;
            (commands::estimate(&cfg, &train, &test)?.1, None)
        }
        Sub::Decompose(args) => {
            let (train, test) = load(args)?;
            (commands::decompose(&cfg, &train, &test)?.1, None)
        }
        Sub::Influence(args) => {
            let (train, test) = load(args)?;
            (commands::influence(&cfg, &train, &test)?.1, None)
        }
        Sub::Active => {
            let out = commands::active(&cfg)?;
            warnings.extend(out.log);
            (out.table, out.failure)
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let meta = Meta::new(&cfg, &table, started.elapsed().as_secs_f64(), warnings);
    write_envelope(&cfg, &table, &meta)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Parses `args`, runs the command, and returns the process exit code.
/// Errors are reported as one line on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                let first = e.to_string();
                let msg = first
                    .lines()
                    .next()
                    .unwrap_or("invalid usage")
                    .trim_start_matches("error: ");
                eprintln!("error kind=input code=2: {msg}");
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}
