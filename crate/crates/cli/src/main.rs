use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kerr_ising_cli::config::{SignalChoice, StateChoice};
use kerr_ising_cli::{run, CliError, ExperimentConfig, Kind, Overrides, RunOptions};

/// Kerr Ising model experiments.
#[derive(Parser, Debug)]
#[command(name = "kim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML) or a previous run's manifest.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Reduce ensembles in trajectory order so output bytes do not depend on
    /// the thread count.
    #[arg(long, global = true)]
    deterministic_reduce: bool,

    /// Use the full ensemble size (`m_full`, 2000 by default).
    #[arg(long, global = true)]
    full: bool,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Which state an ln-sweep diagonalises.
    #[arg(long, global = true, value_enum)]
    state: Option<StateChoice>,

    /// Series feeding the ensemble statistics.
    #[arg(long, global = true, value_enum)]
    signal: Option<SignalChoice>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Lowest levels of the closed network over an (epsilon, eta) grid.
    Spectrum,
    /// Logarithmic negativity of ground or steady states over a grid.
    LnSweep,
    /// Steady state of the damped network at one parameter point.
    SteadyState,
    /// Conditional homodyne trajectories and their statistics.
    Trajectories,
    /// Thermal-noise mean-field trajectories and their statistics.
    Classical,
    /// Statistics of a trajectory CSV.
    Stats,
    /// Quantum against classical statistics from two trajectory CSVs.
    Compare,
    /// Whatever experiment the config names.
    Run,
}

impl Command {
    fn kind(self) -> Option<Kind> {
        Some(match self {
            Command::Spectrum => Kind::Spectrum,
            Command::LnSweep => Kind::LnSweep,
            Command::SteadyState => Kind::SteadyState,
            Command::Trajectories => Kind::Trajectories,
            Command::Classical => Kind::Classical,
            Command::Stats => Kind::Stats,
            Command::Compare => Kind::Compare,
            Command::Run => return None,
        })
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let overrides = Overrides {
        experiment: cli.command.kind(),
        seed: cli.seed,
        full: cli.full,
        state: cli.state,
        signal: cli.signal,
    };
    let cfg = ExperimentConfig::load(path)?.resolve(&overrides)?;
    let report = run(
        &cfg,
        &RunOptions {
            out: cli.out.clone(),
            threads: cli.threads,
            deterministic_reduce: cli.deterministic_reduce,
        },
    )?;
    for f in &report.files {
        println!("{}", f.display());
    }
    eprintln!("{} finished in {:.2} s", cfg.kind(), report.wall_time_s);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
