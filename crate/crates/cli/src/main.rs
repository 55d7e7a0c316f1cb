//! `adiacz`: command-line studies of a two-transmon, tunable-coupler CZ gate.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 for
//! numerical failures.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::output::{Metadata, Writer};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(adiacz::Error),
}

impl From<adiacz::Error> for CliError {
    fn from(e: adiacz::Error) -> Self {
        if e.is_input_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e)
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "adiacz", version, about = "Adiabatic CZ gate studies for tunable-coupler transmons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON study configuration; omitted sections use defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set pulse.t_cz=30`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dressed spectrum, hybridization and ZZ against coupler frequency.
    Spectrum(Common),
    /// Adiabatic factor D for one dressed state and summed over the computational states.
    Dfactor(Common),
    /// Calibrate a Fourier-cosine or AWP CZ pulse to a conditional phase.
    Pulse(Common),
    /// Leakage map of repeated cosine pulses against inter-pulse delay.
    Leakage(Common),
    /// ZZ and total D of the symmetric and asymmetric comparison devices.
    Compare(Common),
    /// Joint fit of device parameters to spectroscopy data.
    Fit(Common),
    /// Interleaved RB decay fits, intervals and gate error.
    Rb(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Spectrum(c) => ("spectrum", c),
            Command::Dfactor(c) => ("dfactor", c),
            Command::Pulse(c) => ("pulse", c),
            Command::Leakage(c) => ("leakage", c),
            Command::Compare(c) => ("compare", c),
            Command::Fit(c) => ("fit", c),
            Command::Rb(c) => ("rb", c),
        }
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (name, common) = cli.command.parts();
    let mut cfg = config::load(common.config.as_deref(), &common.overrides)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    let preset = config::resolve_preset(&cfg.preset)?;
    for w in preset.device().warnings() {
        eprintln!("warning: {w}");
    }
    let mut out = Writer::new(&cfg.output_dir, Metadata::new(name, &preset, cfg.seed))?;
    match cli.command {
        Command::Spectrum(_) => commands::spectrum(&cfg, &preset, &mut out)?,
        Command::Dfactor(_) => commands::dfactor(&cfg, &preset, &mut out)?,
        Command::Pulse(_) => commands::pulse(&cfg, &preset, &mut out)?,
        Command::Leakage(_) => commands::leakage(&cfg, &preset, &mut out)?,
        Command::Compare(_) => commands::compare(&cfg, &mut out)?,
        Command::Fit(_) => commands::fit(&cfg, &preset, &mut out)?,
        Command::Rb(_) => commands::rb(&cfg, &mut out)?,
    }
    Ok(out.written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
