//! `acp` command-line tool: simulated sweeps and controlled runs, live UDP
//! source and monitor endpoints, and analysis of the resulting CSVs.
//!
//! Exit codes: 0 success, 2 configuration or schema error, 3 runtime
//! failure, 4 network failure (including a source whose probes all went
//! unanswered).

pub mod analyze;
pub mod commands;
pub mod config;
pub mod report;
pub mod stats;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("simulation failed: {0}")]
    Runtime(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("connection failed: no probe was acknowledged")]
    ConnectionFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Schema(_) => 2,
            CliError::Runtime(_) | CliError::Output(_) => 3,
            CliError::Network(_) | CliError::ConnectionFailed => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "acp", version, about = "Age Control Protocol experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Directory for CSV output; created if missing.
    #[arg(long, short, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct SimOverrides {
    /// Comma-separated seeds, overriding `sim.seeds`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Simulated seconds per run, overriding `sim.duration_s`.
    #[arg(long)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Open-loop age-versus-rate sweep; writes sweep.csv and nodes.csv.
    SimSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimOverrides,
    },
    /// Controlled source over a simulated network; writes summary.csv,
    /// epochs.csv and nodes.csv.
    SimRun {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimOverrides,
        /// Also write the per-packet event trace (trace.csv).
        #[arg(long)]
        trace: bool,
    },
    /// Live UDP source; writes sends.csv, epochs.csv and summary.csv.
    Source {
        #[command(flatten)]
        common: Common,
        /// Monitor address, overriding `network.monitor`.
        #[arg(long)]
        monitor: Option<String>,
        /// Local address, overriding `network.bind`.
        #[arg(long)]
        bind: Option<String>,
        /// Updates to send, overriding `network.updates`.
        #[arg(long)]
        updates: Option<u64>,
    },
    /// Live UDP monitor; writes monitor.csv when it stops.
    Monitor {
        #[command(flatten)]
        common: Common,
        /// Listen address, overriding `network.listen`.
        #[arg(long)]
        bind: Option<String>,
        /// Stop after this many seconds regardless of traffic.
        #[arg(long)]
        max_duration_s: Option<f64>,
    },
    /// Summaries of one or two summary.csv files; with two, paired per-seed
    /// differences (second minus first).
    Analyze {
        #[arg(required = true, num_args = 1..=2)]
        inputs: Vec<PathBuf>,
        /// Write the empirical age CDF of each input here.
        #[arg(long)]
        cdf: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("acp: {e}");
            e.exit_code()
        }
    }
}
