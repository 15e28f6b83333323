//! Command line front end: simulate posts through the sandbox, score them,
//! evaluate predictions, and export plot-ready data.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

/// Exit codes: 0 success, 2 usage or config, 3 backend or transport,
/// 4 data integrity.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError { code: 2, message: message.into() }
    }
    pub fn backend(message: impl Into<String>) -> CliError {
        CliError { code: 3, message: message.into() }
    }
    pub fn data(message: impl Into<String>) -> CliError {
        CliError { code: 4, message: message.into() }
    }
}

impl From<ugcsim_core::config::ConfigError> for CliError {
    fn from(e: ugcsim_core::config::ConfigError) -> CliError {
        CliError::usage(e.to_string())
    }
}

impl From<ugcsim_core::backend::BackendError> for CliError {
    fn from(e: ugcsim_core::backend::BackendError) -> CliError {
        CliError::backend(e.to_string())
    }
}

impl From<ugcsim_core::population::PopulationError> for CliError {
    fn from(e: ugcsim_core::population::PopulationError) -> CliError {
        CliError::data(e.to_string())
    }
}

impl From<ugcsim_core::runtime::PostError> for CliError {
    fn from(e: ugcsim_core::runtime::PostError) -> CliError {
        CliError::data(e.to_string())
    }
}

impl From<ugcsim_core::runtime::TraceError> for CliError {
    fn from(e: ugcsim_core::runtime::TraceError) -> CliError {
        CliError::data(e.to_string())
    }
}

impl From<ugcsim_core::prompt::PromptError> for CliError {
    fn from(e: ugcsim_core::prompt::PromptError) -> CliError {
        CliError::usage(e.to_string())
    }
}

impl From<ugcsim_core::predict::PredictError> for CliError {
    fn from(e: ugcsim_core::predict::PredictError) -> CliError {
        match e {
            ugcsim_core::predict::PredictError::Backend(inner) => inner.into(),
            other => CliError::data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ugcsim",
    version,
    about = "Deterministic social-network sandbox for UGC popularity prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every post through the sandbox and write one trace each.
    Simulate {
        /// TOML config file.
        #[arg(long)]
        config: PathBuf,
        /// Line-delimited posts file.
        #[arg(long)]
        posts: PathBuf,
        /// Output directory for traces, artifacts and the run manifest.
        #[arg(long)]
        out: PathBuf,
        /// Posts simulated concurrently; each post keeps its own seed.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score simulated posts through the configured backend.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        posts: PathBuf,
        /// Directory written by `simulate`.
        #[arg(long)]
        run: PathBuf,
        /// Predictions file to write.
        #[arg(long)]
        out: PathBuf,
        /// Also dump this command's backend usage report here.
        #[arg(long)]
        usage: Option<PathBuf>,
    },
    /// Score predictions against labels and report MAE, MSE, SRC and CE.
    Eval {
        /// Prediction files; all must share one config digest.
        #[arg(long = "predictions", required = true)]
        predictions: Vec<PathBuf>,
        /// Eval report file to write; stdout gets a summary either way.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a trace as plot-ready column files.
    Plotdata {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Pretty-print a usage report written by simulate or predict.
    ReportUsage {
        /// A usage file, or a run directory containing usage.json.
        #[arg(long)]
        usage: PathBuf,
    },
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, posts, out, jobs } => {
            commands::simulate(&config, &posts, &out, jobs)
        }
        Command::Predict { config, posts, run, out, usage } => {
            commands::predict(&config, &posts, &run, &out, usage.as_deref())
        }
        Command::Eval { predictions, out } => commands::eval(&predictions, out.as_deref()),
        Command::Plotdata { trace, out_dir } => commands::plotdata(&trace, &out_dir),
        Command::ReportUsage { usage } => commands::report_usage(&usage),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
