//! Front end for the `ctpg` binary: argument definitions, configuration,
//! snapshots and the four subcommands.
//!
//! Exit codes: 0 success, 1 configuration/input error, 2 training or
//! solver failure, 3 gradient-check mismatch.

pub mod commands;
pub mod config;
pub mod snapshot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{Case, RunConfig};
pub use snapshot::Snapshot;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
    #[error("bad grid spec: {0}")]
    GridSpec(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("simulation failed: {0}")]
    Solver(String),
    #[error("gradient check failed: {0}")]
    GradientMismatch(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_)
            | CliError::Snapshot(_)
            | CliError::GridSpec(_)
            | CliError::Io { .. } => 1,
            CliError::Training(_) | CliError::Solver(_) => 2,
            CliError::GradientMismatch(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ctpg",
    version,
    about = "Train and evaluate neural gain schedules for a three-loop autopilot"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy; writes learning_curve.csv, params.snapshot, summary.json.
    Train(TrainArgs),
    /// Fly one scenario with a saved policy and write the trajectory CSV.
    Simulate(SimulateArgs),
    /// Compare adjoint and finite-difference gradients on one scenario.
    Gradcheck(GradcheckArgs),
    /// Tabulate the gain surfaces over an (alpha, Mach) grid at fixed altitude.
    ExportGains(ExportGainsArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub case: Option<Case>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub h0: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub v0: f64,
    /// Commanded normal acceleration, m/s².
    #[arg(long, allow_negative_numbers = true)]
    pub cmd: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Supplies airframe, solver and horizon settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Picks the grid member and the initial parameters.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scale the analytic parameter partials (negative-control hook).
    #[arg(long, hide = true)]
    pub corrupt_derivatives: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExportGainsArgs {
    #[arg(long)]
    pub params: PathBuf,
    /// Altitude, m.
    #[arg(long, default_value_t = 5000.0)]
    pub h: f64,
    /// Angle-of-attack grid `lo:hi:n`, rad.
    #[arg(long, default_value = "0:0.5:11", allow_hyphen_values = true)]
    pub alpha: String,
    /// Mach grid `lo:hi:n`.
    #[arg(long, default_value = "1.5:4:11", allow_hyphen_values = true)]
    pub mach: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::ExportGains(a) => commands::export_gains(&a),
    }
}
