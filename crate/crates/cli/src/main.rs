//! Command-line front door: `synth`, `train`, `tune`, `evaluate`,
//! `forecast`. Every command is driven by one master seed and a flat
//! key-value configuration file, with flag overrides; identical inputs
//! produce byte-identical outputs.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit code for usage and configuration problems.
const EXIT_USAGE: u8 = 2;
/// Exit code for runtime failures.
const EXIT_FAILURE: u8 = 1;

#[derive(Parser)]
#[command(
    name = "demandcast",
    about = "Working-day demand forecasting: data generation, training, tuning, evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for per-product fan-out (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sales dataset (sales, holiday and metadata CSVs).
    Synth,
    /// Train models according to the experiment plan in the config file.
    Train,
    /// Random-search hyperparameters per product.
    Tune,
    /// Evaluate trained models and benchmark tags on the test split.
    Evaluate {
        /// Comma-separated model list: baseline tags (ets, mpq, mdpq, lr,
        /// rf), `oracle`, or paths to trained model files.
        #[arg(long)]
        models: Option<String>,
    },
    /// Multi-step forecast from trained model files.
    Forecast {
        /// Model file or directory of model files.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Forecast origin date (default: last observed working day).
        #[arg(long)]
        origin: Option<String>,
    },
}

/// Error wrapper marking bad user input; mapped to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(core) = cause.downcast_ref::<demandcast_core::Error>() {
            if core.is_usage() {
                return EXIT_USAGE;
            }
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return EXIT_USAGE;
            }
        }
    }
    EXIT_FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("error: cannot configure worker pool: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }

    let ctx = match run::RunContext::new(cli.config.as_deref(), cli.seed, &cli.out) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code_for(&e));
        }
    };

    let result = match &cli.command {
        Command::Synth => commands::synth(&ctx),
        Command::Train => commands::train(&ctx),
        Command::Tune => commands::tune(&ctx),
        Command::Evaluate { models } => commands::evaluate(&ctx, models.as_deref()),
        Command::Forecast { model, origin } => {
            commands::forecast(&ctx, model.as_deref(), origin.as_deref())
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
