//! Command-line front end for the MDOF digital twin.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdof_twin::TwinError;

#[derive(Parser, Debug)]
#[command(name = "mdof-twin", version, about = "Digital twin of stochastic nonlinear MDOF systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON config with sections system / campaign / ukf / gp / integrator.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Observed DOFs, one-based, comma separated (e.g. `1` or `1,2`).
    #[arg(long, global = true, value_delimiter = ',')]
    pub observe: Option<Vec<usize>>,
    /// Train GP models only on windows up to this day.
    #[arg(long, global = true)]
    pub cutoff_days: Option<f64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate one window at nominal parameters.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the UKF over one measurement window.
    Filter {
        #[command(flatten)]
        common: Common,
        /// Window CSV (with a JSON sidecar of the same stem); synthesized at
        /// nominal parameters when omitted.
        #[arg(long)]
        window: Option<PathBuf>,
    },
    /// Generate and assimilate a synthetic campaign.
    Campaign {
        #[command(flatten)]
        common: Common,
    },
    /// Forecast parameters and response from a snapshot.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Snapshot file; defaults to `<out>/snapshot.json`.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Forecast days, comma separated; defaults to the campaign horizon.
        #[arg(long, value_delimiter = ',')]
        at: Option<Vec<f64>>,
        /// Parameter draws for the response ensemble.
        #[arg(long, default_value_t = 0)]
        ensemble: usize,
        /// Response duration in seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Summarize a snapshot.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common }
            | Command::Filter { common, .. }
            | Command::Campaign { common }
            | Command::Predict { common, .. }
            | Command::Report { common, .. } => common,
        }
    }
}

/// Error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const USAGE: u8 = 2;
    pub const NUMERIC: u8 = 3;

    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: Self::USAGE,
            message: message.into(),
        }
    }
}

impl From<TwinError> for CliError {
    fn from(e: TwinError) -> Self {
        Self {
            code: if e.is_numeric() { Self::NUMERIC } else { Self::USAGE },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.command.common().verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
