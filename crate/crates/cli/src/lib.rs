//! Batch driver: INI configuration, run directories and command dispatch.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{Log, Outcome};
pub use config::{parse_config, Beta0Config, RunConfig, Solver};
pub use error::CliError;

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "tracer", about = "Heavy tracer particle in a Bose gas: simulation and analysis")]
pub struct Cli {
    /// INI configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory (sweep: root of the run directories).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (sweep: concurrent runs).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Direct and/or reduced run per `[run] solver`.
    Simulate,
    /// Reduced memory-kernel run plus kernel tables along it.
    Reduced,
    /// Kernel tables along the ballistic path.
    Kernel,
    /// JSON report for an existing run directory.
    Analyze {
        /// Defaults to `--out`.
        run_dir: Option<PathBuf>,
    },
    /// Repeat `simulate` + `analyze` over `[sweep] speeds`.
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Reduced => "reduced",
            Command::Kernel => "kernel",
            Command::Analyze { .. } => "analyze",
            Command::Sweep => "sweep",
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// `--out`, else `$BT_OUT_DIR/<command>`, else `runs/<command>`.
pub fn output_dir(cli_out: Option<&Path>, env_root: Option<&str>, command: &str) -> PathBuf {
    match (cli_out, env_root) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(root)) if !root.is_empty() => Path::new(root).join(command),
        _ => Path::new("runs").join(command),
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let log = Log { quiet: cli.quiet };
    let env_root = std::env::var("BT_OUT_DIR").ok();
    let dir = output_dir(cli.out.as_deref(), env_root.as_deref(), cli.command.name());
    let workers = cli.workers.unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Usage("--workers must be >= 1".into()));
    }
    if !matches!(cli.command, Command::Sweep) {
        tracer_core::par::set_workers(workers);
    }
    let need_config = || {
        cli.config
            .as_deref()
            .ok_or_else(|| CliError::Usage("--config is required for this command".into()))
            .and_then(load_config)
    };
    match &cli.command {
        Command::Simulate => commands::simulate(&need_config()?, &dir, log),
        Command::Reduced => commands::reduced_command(&need_config()?, &dir, log),
        Command::Kernel => commands::kernel_command(&need_config()?, &dir, log),
        Command::Sweep => commands::sweep(&need_config()?, &dir, workers, log),
        Command::Analyze { run_dir } => {
            let dir = run_dir.clone().unwrap_or(dir);
            let cfg = cli.config.as_deref().map(load_config).transpose()?;
            commands::analyze_command(cfg.as_ref(), &dir, log)
        }
    }
}
