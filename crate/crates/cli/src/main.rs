//! `splitband`: analytic spectra, stochastic runs, sweeps and fast-cavity
//! line spectra from a JSON configuration.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Common;
use splitband::config::{preset, SweepAxis, PRESET_NAMES};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Numerical(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<splitband::Error> for Failure {
    fn from(e: splitband::Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "splitband", version, about = "Split-sideband spectra of slowly modulated optomechanical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Comb-solver spectra, decomposition and split-peak report.
    Analytic(Common),
    /// Stochastic trajectories, ensemble-averaged spectra and comparison with the emergent linear model.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Seed of one trajectory; repeat for an ensemble.
        #[arg(long = "seed", required = true)]
        seeds: Vec<u64>,
    },
    /// Analytic summary over one parameter axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// FIELD=v1,v2,...; FIELD is a config key such as omega_2_rad_s or system.g_bar_rad_s.
        #[arg(long)]
        sweep: SweepAxis,
    },
    /// Fast-cavity line spectrum and its Lorentzian-broadened display spectrum.
    Fastcavity(Common),
    /// Print a shipped configuration.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        name: String,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = match &cli.command {
        Command::Analytic(c) => commands::analytic(c)?,
        Command::Simulate { common, seeds } => commands::simulate(common, seeds)?,
        Command::Sweep { common, sweep } => commands::sweep(common, sweep)?,
        Command::Fastcavity(c) => commands::fastcavity(c)?,
        Command::Preset { name } => {
            let cfg = preset(name).ok_or_else(|| Failure::Config(format!("unknown preset {name}")))?;
            println!("{}", cfg.to_json()?);
            return Ok(());
        }
    };
    println!("{}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("splitband: {e}");
            ExitCode::from(e.code())
        }
    }
}
