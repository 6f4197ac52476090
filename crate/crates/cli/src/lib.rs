//! Command-line front end: regenerates figure data and derived numbers as
//! CSV/JSON traces and structured scalar records.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod output;
mod synth;

pub use output::{Format, Record, Source};

#[derive(Parser, Debug)]
#[command(name = "qswitch", version, about = "Atom–cavity photon switch: figure data and parameter reports")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Parameter file (flat key = value); keys override the built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub params: Option<PathBuf>,
    /// Single parameter override, e.g. `--set delta_c_2pi_MHz=300`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Cooperativity override; rescales g with the cavity and atom rates fixed.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Inhomogeneous detuning spread (standard deviation, 2π × MHz).
    #[arg(long = "sigma-delta", global = true, default_value_t = 60.0, value_name = "MHZ")]
    pub sigma_delta: f64,
    /// Mean photon number of the gate pulse.
    #[arg(long, global = true, default_value_t = 0.6)]
    pub alpha2: f64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Reflection phase versus detuning, with and without the atom.
    Fig2b(commands::Fig2bArgs),
    /// Saturation curves and disorder-averaged photon correlations.
    Fig3(commands::Fig3Args),
    /// Conditioned and unconditioned Ramsey fringes of the switch.
    Fig4c(commands::Fig4cArgs),
    /// Fit the interferometer characterization spectrum.
    SpectrumFit(commands::SpectrumFitArgs),
    /// Fit an excited-state decay and convert it to a cooperativity.
    LifetimeFit(commands::LifetimeFitArgs),
    /// Summary of the derived numbers.
    Report(commands::ReportArgs),
}

/// Runs one command and writes its files, returning their paths. Nothing is
/// written if the command fails.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let out = match &cli.command {
        Command::Fig2b(a) => commands::fig2b(&cli.common, a),
        Command::Fig3(a) => commands::fig3(&cli.common, a),
        Command::Fig4c(a) => commands::fig4c(&cli.common, a),
        Command::SpectrumFit(a) => commands::spectrum_fit(&cli.common, a),
        Command::LifetimeFit(a) => commands::lifetime_fit(&cli.common, a),
        Command::Report(a) => commands::report(&cli.common, a),
    }?;
    out.commit()
}
