use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lics_cli::commands::{cmd_optimize, cmd_presets, cmd_simulate, cmd_sweep, CommonOpts};
use lics_cli::config::RunConfig;
use lics_cli::{CliError, CliResult};

/// Simulate, sweep, and optimize three-pulse dissociation-control
/// schedules driven by structured config files.
#[derive(Parser)]
#[command(name = "lics", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML). Required by every command except
    /// `presets`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for sweeps and optimizer starts (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Output directory, overriding the config's `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Keep going when sweep cells fail; failed cells become NaN.
    #[arg(long, global = true)]
    permit_partial: bool,

    /// Seed for the optimizer's start placement.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one schedule and write the trajectory table + summary.
    Simulate,
    /// Run a 1D/2D parameter sweep and write matrix files.
    Sweep,
    /// Search schedule parameters for a target final distribution.
    Optimize,
    /// List the built-in scenario presets.
    Presets,
}

fn load_config(path: &Option<PathBuf>) -> CliResult<RunConfig> {
    let path = path
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required for this command".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

fn run(cli: &Cli) -> CliResult<()> {
    let opts = CommonOpts {
        workers: cli.workers,
        out_override: cli.out.clone(),
        permit_partial: cli.permit_partial,
        seed: cli.seed,
    };
    match cli.command {
        Command::Simulate => cmd_simulate(&load_config(&cli.config)?, &opts),
        Command::Sweep => cmd_sweep(&load_config(&cli.config)?, &opts),
        Command::Optimize => cmd_optimize(&load_config(&cli.config)?, &opts),
        Command::Presets => cmd_presets(),
    }
}

fn main() -> ExitCode {
    // window-margin warnings from the integrator should be visible without
    // RUST_LOG gymnastics
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
