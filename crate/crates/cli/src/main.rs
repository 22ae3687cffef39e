//! `qwave`: run open-boundary Schrödinger scenarios from TOML files.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, RunOptions, Sweep};
use scenario::{parse_scenario, Scenario};

#[derive(Parser)]
#[command(name = "qwave", version, about = "Open-boundary Schrödinger solvers (DTBC and PML)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary scattering state, optionally swept over energy or flux.
    Scatter(Common),
    /// Time evolution with trajectory samples and snapshots.
    Evolve(Common),
    /// Transverse lead modes of a two-dimensional device.
    Modes(Common),
    /// Bound states of a closed device near a shift energy.
    Eigs(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, env = "QWAVE_OUT_DIR", default_value = "qwave-out")]
    out: PathBuf,
    /// Parameter sweep `param:lo:hi:n:log|lin` (energy in meV, flux in flux quanta).
    #[arg(long)]
    sweep: Option<Sweep>,
    /// Steps between field snapshots (overrides the scenario).
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Worker threads for sweeps and parallel assembly.
    #[arg(long)]
    threads: Option<usize>,
    /// Write fields as binary dumps instead of CSV.
    #[arg(long)]
    binary: bool,
    /// Resume an interrupted run (not supported; always refused).
    #[arg(long)]
    resume: bool,
}

fn load(path: &PathBuf) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    let (common, name) = match &cli.command {
        Command::Scatter(c) => (c, "scatter"),
        Command::Evolve(c) => (c, "evolve"),
        Command::Modes(c) => (c, "modes"),
        Command::Eigs(c) => (c, "eigs"),
    };
    if common.resume {
        return Err(CliError::Validation("--resume is not supported: runs keep no checkpoints".into()));
    }
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot configure {n} threads: {e}")))?;
    }
    if common.sweep.is_some() && name != "scatter" {
        return Err(CliError::Validation("--sweep applies to scatter only".into()));
    }
    let scenario = load(&common.scenario)?;
    let opts = RunOptions {
        out: common.out.clone(),
        sweep: common.sweep.clone(),
        snapshot_every: common.snapshot_every,
        binary: common.binary,
    };
    match cli.command {
        Command::Scatter(_) => commands::scatter(&scenario, &opts),
        Command::Evolve(_) => commands::evolve(&scenario, &opts),
        Command::Modes(_) => commands::modes(&scenario, &opts),
        Command::Eigs(_) => commands::eigs(&scenario, &opts),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
