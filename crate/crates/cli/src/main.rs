//! `eflab`: data generation, training, constructive approximation, dimension
//! estimation and rate sweeps. Every run writes `manifest.json` next to its
//! outputs; `eflab replay` reruns a manifest and checks the output hashes.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ApproxArgs, DimArgs, GenArgs, SweepArgs, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 2.
    Config(String),
    /// The run itself failed; exit code 1.
    Runtime(String),
}

impl CliError {
    fn context(self, what: &str) -> Self {
        match self {
            Self::Config(m) => Self::Config(format!("{what}: {m}")),
            Self::Runtime(m) => Self::Runtime(format!("{what}: {m}")),
        }
    }

    fn from_io(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<eflab_core::Error> for CliError {
    fn from(e: eflab_core::Error) -> Self {
        use eflab_core::Error as E;
        match e {
            E::InvalidInput(_) | E::Sizing(_) | E::Capability(_) | E::Parse(_) => Self::Config(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "eflab", version, about = "Exponential-family regression experiments with ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic dataset (data.csv, data.json).
    Gen(GenArgs),
    /// Fit a ReLU network by empirical risk minimization (model.json, trace.csv).
    Train(TrainArgs),
    /// Compile the constructive approximant of a target (cert.json, model.json).
    Approx(ApproxArgs),
    /// Estimate the dimension of a sample from dyadic covers (profile.csv, estimate.json).
    Dim(DimArgs),
    /// Run the error-versus-n sweep (cells.csv, summary.json, slope.dat).
    Sweep(SweepArgs),
    /// Rerun a recorded manifest and compare output hashes.
    Replay {
        /// manifest.json of the run to reproduce.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory receiving the rerun's outputs.
        #[arg(long)]
        output_dir: PathBuf,
    },
}

fn single_threaded() {
    // a second call only fails if a pool already exists
    let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => {
            single_threaded();
            commands::gen(&a.resolve()?).map(drop)
        }
        Command::Train(a) => {
            single_threaded();
            commands::train(&a.resolve()?).map(drop)
        }
        Command::Approx(a) => {
            single_threaded();
            commands::approx(&a.resolve()?).map(drop)
        }
        Command::Dim(a) => {
            single_threaded();
            commands::dim(&a.resolve()?).map(drop)
        }
        Command::Sweep(a) => {
            if a.jobs == Some(0) {
                return Err(CliError::Config("--jobs must be at least 1".into()));
            }
            commands::sweep(&a.resolve()?, a.jobs).map(drop)
        }
        Command::Replay { manifest, output_dir } => {
            let m = manifest::read_manifest(&manifest)?;
            if m.command != "sweep" {
                single_threaded();
            }
            commands::replay(&m, &output_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
