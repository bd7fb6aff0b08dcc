//! Command-line driver: strict JSON configs in, CSV/JSON/plot files out.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::CommandOutput;
use crate::config::Config;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QRM_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "qrm-out";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qrm", version, about = "Quasi-reversibility experiments for the bi-parabolic source problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Override the experiment seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the number of retained modes.
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    /// Output directory (default: config, then $QRM_OUT_DIR, then ./qrm-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the admissibility assumption on the time profile.
    CheckPsi { config: PathBuf },
    /// Apply the forward operator to the configured source.
    Forward { config: PathBuf },
    /// Reconstruct the source from noisy data.
    Invert { config: PathBuf },
    /// Tabulate the discrepancy function and solve the discrepancy equation.
    Morozov { config: PathBuf },
    /// Convergence-rate experiment over the noise grid.
    Rate { config: PathBuf },
    /// Modulus of continuity: closed form, bounds, oracle and optimality ratio.
    Modulus { config: PathBuf },
    /// Ill-posedness table for unit data modes.
    Illposed { config: PathBuf },
}

impl Command {
    pub fn config_path(&self) -> &PathBuf {
        match self {
            Command::CheckPsi { config }
            | Command::Forward { config }
            | Command::Invert { config }
            | Command::Morozov { config }
            | Command::Rate { config }
            | Command::Modulus { config }
            | Command::Illposed { config } => config,
        }
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub exit_code: i32,
    pub summary: String,
    pub written: Vec<PathBuf>,
}

pub fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = Config::load(cli.command.config_path())?;
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = Some(seed);
    }
    if let Some(modes) = cli.modes {
        cfg.domain.modes = modes;
    }
    Ok(cfg)
}

pub fn output_dir(cli: &Cli, cfg: &Config) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.experiment.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn execute(command: &Command, cfg: &Config) -> Result<CommandOutput> {
    match command {
        Command::CheckPsi { .. } => commands::check_psi(cfg),
        Command::Forward { .. } => commands::forward(cfg),
        Command::Invert { .. } => commands::invert(cfg),
        Command::Morozov { .. } => commands::morozov(cfg),
        Command::Rate { .. } => commands::rate(cfg),
        Command::Modulus { .. } => commands::modulus(cfg),
        Command::Illposed { .. } => commands::illposed(cfg),
    }
}

/// Runs one subcommand and writes its artifacts. Errors are usage or
/// input problems; theorem-level failures come back as exit code 2.
pub fn run(cli: &Cli) -> Result<RunResult> {
    let cfg = load_config(cli)?;
    let out = execute(&cli.command, &cfg)?;
    let written = out.artifacts.write_all(&output_dir(cli, &cfg))?;
    let (exit_code, summary) = match out.violation {
        None => (EXIT_PASS, out.summary),
        Some(v) => (EXIT_VIOLATION, format!("{} [VIOLATION: {}]", out.summary, v)),
    };
    Ok(RunResult { exit_code, summary, written })
}

/// Maps an error to its exit code: theorem violations raised inside the
/// library are 2, everything else is 1.
pub fn error_exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<qrm_core::Error>() {
        Some(qrm_core::Error::TheoremViolation(_)) => EXIT_VIOLATION,
        _ => EXIT_USAGE,
    }
}
