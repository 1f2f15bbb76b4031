//! `qrel`: verification suites, dual-time evolutions and group sweeps.
//!
//! Exit codes: 0 pass, 1 failed assertion or integrator guard, 2 bad
//! configuration.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Status;
use crate::config::{ConfigError, Overrides};

#[derive(Parser)]
#[command(name = "qrel", version, about = "Uncertainty-relativity verification and dual-time dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write report.json.
    Verify(Common),
    /// Integrate the initial state and write trajectory.csv and summary.json.
    Evolve(Common),
    /// Sweep the dilatation group and write transform.csv and summary.json.
    Transform(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON); every field has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suites to run: group, functionals, brackets, dynamics, classical-limit.
    #[arg(long, value_delimiter = ',')]
    suite: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `consistent` or `paper-literal`.
    #[arg(long)]
    convention: Option<String>,
}

/// Sizes rayon's global pool from `QREL_THREADS`.
fn init_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("QREL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::new("QREL_THREADS", format!("expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::new("QREL_THREADS", e.to_string()))
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    init_threads()?;
    let (Command::Verify(common) | Command::Evolve(common) | Command::Transform(common)) = &cli.command;
    let overrides = Overrides {
        suites: common.suite.clone(),
        output: common.out.clone(),
        convention: common.convention.clone(),
    };
    let scenario = config::load(common.config.as_deref(), overrides)?;
    commands::prepare(&scenario)?;
    match cli.command {
        Command::Verify(_) => commands::verify(&scenario),
        Command::Evolve(_) => commands::evolve(&scenario),
        Command::Transform(_) => commands::transform(&scenario),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qrel: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
