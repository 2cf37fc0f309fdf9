//! `stgof`: estimate the number of communities in a network, and run seeded
//! simulation studies of the estimator.

mod estimate;
mod experiment;
mod generate;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use stgof_core::dcbm::DcbmError;
use stgof_core::graph::{GraphError, Indexing};
use stgof_core::stgof::StgofError;

/// Exit status when every candidate up to `--kmax` was rejected.
pub const EXIT_KMAX: u8 = 3;
/// Exit status when the estimator could not run on the input.
pub const EXIT_ESTIMATION: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Graph(#[from] GraphError),
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("{0}")]
    Estimation(#[from] StgofError),
}

impl From<DcbmError> for CliError {
    fn from(e: DcbmError) -> Self {
        CliError::Spec(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Graph(_) => 1,
            CliError::Spec(_) => 2,
            CliError::Estimation(_) => EXIT_ESTIMATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stgof", version, about = "Stepwise goodness-of-fit estimation of the number of communities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IndexingArg {
    Zero,
    One,
}

impl From<IndexingArg> for Indexing {
    fn from(arg: IndexingArg) -> Self {
        match arg {
            IndexingArg::Zero => Indexing::ZeroBased,
            IndexingArg::One => Indexing::OneBased,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FallbackArg {
    Error,
    ArgminPsi,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate K for a graph given as an edge list or GML file.
    Estimate(estimate::EstimateArgs),
    /// Accuracy of the estimator over a sweep of sparsity levels.
    Experiment {
        /// TOML experiment spec.
        #[arg(long)]
        spec: PathBuf,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples of psi at m = 1..K under a simulated model.
    Calibrate {
        /// TOML simulation spec.
        #[arg(long)]
        spec: PathBuf,
        /// Per-replicate samples CSV.
        #[arg(long)]
        out: PathBuf,
        /// Summary CSV; standard output when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Write simulated graphs and their ground-truth labels.
    Generate(generate::GenerateArgs),
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Estimate(args) => estimate::run(&args),
        Command::Experiment { spec, out } => experiment::run_experiment(&spec, out.as_deref()).map(|_| 0),
        Command::Calibrate { spec, out, summary } => experiment::run_calibration(&spec, &out, summary.as_deref()).map(|_| 0),
        Command::Generate(args) => generate::run(&args).map(|_| 0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
