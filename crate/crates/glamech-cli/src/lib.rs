//! Command-line front end for `glamech`: simulations, invariant checks and coefficient
//! dumps for shipped presets or JSON-defined systems.

pub mod checks;
pub mod commands;
pub mod config;
pub mod expr;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::run;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Config = 1,
    Divergence = 2,
    Regularity = 3,
    CheckFailure = 4,
}

#[derive(Clone, Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: ExitCode::Config, message: message.into() }
    }

    pub fn config_at(line: usize, column: usize, message: impl Into<String>) -> Self {
        CliError { code: ExitCode::Config, message: format!("config error at line {line}, column {column}: {}", message.into()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<glamech::Error> for CliError {
    fn from(e: glamech::Error) -> Self {
        use glamech::Error as E;
        let code = match &e {
            E::Divergence { .. } | E::NonFinite { .. } => ExitCode::Divergence,
            E::Regularity { .. } | E::Degenerate { .. } => ExitCode::Regularity,
            E::Dimension { .. } | E::UnknownPreset(_) | E::InvalidArgument(_) => ExitCode::Config,
        };
        let message = match &e {
            E::Divergence { last_x, last_y, .. } => format!("{e}; last good state x = {last_x:?}, y = {last_y:?}"),
            _ => e.to_string(),
        };
        CliError { code, message }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config(format!("i/o error: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "glamech", version, about = "Mechanical systems on generalized Lie algebroids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the equations of motion and write a CSV trajectory.
    Simulate(SimulateArgs),
    /// Run the invariant suite and print a JSON report.
    Check(CheckArgs),
    /// Print the coefficient arrays at one point as JSON.
    Coeffs(CoeffsArgs),
    /// List the shipped presets.
    Presets,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SystemArgs {
    /// Shipped preset name (see `glamech presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct StateArgs {
    /// Initial base point, comma separated; a single value is repeated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Initial fibre point, comma separated; a single value is repeated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub state: StateArgs,
    /// End time (default 10).
    #[arg(long)]
    pub t1: Option<f64>,
    /// Step size (default 1e-3).
    #[arg(long)]
    pub dt: Option<f64>,
    /// rk4 or euler (default rk4).
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Seed for the randomized checks (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tolerance applied to every check.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CoeffsArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Evaluation point; defaults to the initial state.
    #[command(flatten)]
    pub state: StateArgs,
}
