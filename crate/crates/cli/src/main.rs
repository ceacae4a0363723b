//! Command-line front end: data ingestion, model fitting, zero-variance
//! reporting, influence analysis, model comparison and the simulation study.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

mod commands;
mod config;
mod ingest;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "zvgarch",
    version,
    about = "Bayesian GJR-GARCH(1,1) estimation with HMC/RWM sampling, \
             zero-variance post-processing, influence diagnostics and \
             model comparison"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model: posterior summary, criteria, optional chain file.
    Fit(FitArgs),
    /// Case-deletion influence analysis of a previously fitted chain.
    Diagnose(DiagnoseArgs),
    /// Fit all four error distributions and tabulate comparison criteria.
    Compare(CompareArgs),
    /// Bias/SE simulation study across samplers and ZV variants.
    Study(StudyArgs),
}

/// Flags shared by every command. Every value can also come from a
/// `key = value` config file (`--config`); command-line flags win.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// Plain-text config file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Input interpretation: prices (hundredfold log-returns are computed)
    /// or returns (used as-is).
    #[arg(long)]
    pub mode: Option<String>,
    /// Error distribution: normal | t | ged | gt.
    #[arg(long)]
    pub dist: Option<String>,
    /// Sampler: hmc | rwm (study also accepts both).
    #[arg(long)]
    pub sampler: Option<String>,
    /// Retained posterior draws per chain (after burn-in).
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Common variance of the truncated-normal priors.
    #[arg(long = "prior-var")]
    pub prior_var: Option<f64>,
    /// HMC leapfrog step size; omitted means auto-tune toward [0.7, 0.9].
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "leapfrog-steps")]
    pub leapfrog_steps: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "date-col")]
    pub date_col: Option<String>,
    #[arg(long = "value-col")]
    pub value_col: Option<String>,
    /// h1 policy: unconditional | sample-variance.
    #[arg(long)]
    pub h1: Option<String>,
    /// Disable thread-pool parallelism (results are identical either way).
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Write the estimation chain to chain.csv (needed by `diagnose`).
    #[arg(long = "save-chain")]
    pub save_chain: bool,
    /// Use one chain split in half for ZV instead of two chains.
    #[arg(long = "zv-split")]
    pub zv_split: bool,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// chain.csv written by `fit --save-chain`; metadata.json is read from
    /// the same directory.
    #[arg(long)]
    pub chain: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Comma-separated sample sizes, e.g. 200,500.
    #[arg(long)]
    pub sizes: Option<String>,
    /// True parameters mu,omega,alpha,phi,beta.
    #[arg(long)]
    pub truth: Option<String>,
    /// True shape parameter(s): nu for t/ged, nu,eta for gt.
    #[arg(long)]
    pub shape: Option<String>,
    #[arg(long = "pilot-draws")]
    pub pilot_draws: Option<usize>,
    #[arg(long = "pilot-epsilon")]
    pub pilot_epsilon: Option<f64>,
    #[arg(long = "target-accept")]
    pub target_accept: Option<f64>,
}

/// CLI-level error carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<zvgarch::Error> for CliError {
    fn from(e: zvgarch::Error) -> Self {
        match e {
            zvgarch::Error::InvalidParameter(m) => CliError::Config(m),
            zvgarch::Error::Data { index, message } => {
                CliError::Data(format!("index {index}: {message}"))
            }
            zvgarch::Error::Contract(m) | zvgarch::Error::Numerical(m) => CliError::Numerical(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => commands::fit(&args),
        Command::Diagnose(args) => commands::diagnose(&args),
        Command::Compare(args) => commands::compare(&args),
        Command::Study(args) => commands::study(&args),
    };
    if let Err(e) = outcome {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
