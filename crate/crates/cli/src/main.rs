//! `epirecon`: incidence reconstruction from deaths, excess deaths from
//! iterated life tables, and heterogeneous SEIR runs from the command line.

mod cmd;
mod config;
mod error;
mod io;
mod svg;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "epirecon", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct fatal incidence from daily deaths, with log R and a
    /// forward-simulation check.
    #[command(args_override_self = true)]
    Deconv(cmd::deconv::DeconvArgs),
    /// Expected and excess weekly deaths by iterated life table, weekly
    /// average and fixed-population life table.
    #[command(args_override_self = true)]
    Excess(cmd::excess::ExcessArgs),
    /// Integrate the SEIR model, optionally with a two-compartment lockdown.
    #[command(args_override_self = true)]
    Seir(cmd::seir::SeirArgs),
    /// Final epidemic size over a grid of R0 and immunity coefficients.
    #[command(args_override_self = true)]
    Finalsize(cmd::seir::FinalsizeArgs),
    /// Refit deaths and compare them with deaths simulated forward from the
    /// reconstruction under a possibly different delay distribution.
    #[command(args_override_self = true)]
    Simcheck(cmd::deconv::SimcheckArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Main input CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory receiving the output files.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Seed for every random draw of the run.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Flat-key TOML file of flag values; flags on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run replicate loops on one thread.
    #[arg(long)]
    pub sequential: bool,
}

impl Common {
    pub fn require_input(&self) -> Result<&PathBuf, CliError> {
        self.input
            .as_ref()
            .ok_or_else(|| CliError::input("--input is required"))
    }

    pub fn reject_input(&self, what: &str) -> Result<(), CliError> {
        match &self.input {
            Some(_) => Err(CliError::input(format!("{what} takes no --input"))),
            None => Ok(()),
        }
    }

    pub fn execution(&self) -> epirecon_core::par::Execution {
        if self.sequential {
            epirecon_core::par::Execution::Sequential
        } else {
            epirecon_core::par::Execution::Parallel
        }
    }
}

fn run() -> Result<(), CliError> {
    let args = config::expand(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            // help and version requests exit 0; usage errors exit 2
            std::process::exit(code);
        }
    };
    let (common, outputs) = match cli.command {
        Command::Deconv(a) => (a.common.clone(), cmd::deconv::run(&a)?),
        Command::Simcheck(a) => (a.fit.common.clone(), cmd::deconv::run_simcheck(&a)?),
        Command::Excess(a) => (a.common.clone(), cmd::excess::run(&a)?),
        Command::Seir(a) => (a.common.clone(), cmd::seir::run(&a)?),
        Command::Finalsize(a) => (a.common.clone(), cmd::seir::run_finalsize(&a)?),
    };
    let names: Vec<String> = outputs.names().map(str::to_string).collect();
    outputs.commit(&common.out_dir)?;
    println!("wrote {} to {}", names.join(", "), common.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
