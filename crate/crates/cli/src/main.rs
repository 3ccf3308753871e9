//! `cqed`: device reports, dephasing predictions, simulations, sweeps and
//! the verification suite, driven by a flat TOML configuration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use config::RunConfig;
use error::CliError;
use output::{Emitter, Format};

#[derive(Parser, Debug)]
#[command(
    name = "cqed",
    version,
    about = "Thermal-photon dephasing of a cavity-coupled qubit"
)]
struct Cli {
    /// Configuration file (flat TOML with unit-suffixed keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for summary.json and the command's CSV table.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and verification; all cores by default.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// What to print on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Derived device parameters: E_C, chi, kappa, Purcell T1, Q factors, modes.
    Derive,
    /// Closed-form thermal dephasing rates and the implied T2.
    Predict,
    /// Master-equation T1 or Ramsey experiment with a curve fit.
    Simulate,
    /// Cartesian sweep of `predict` or `simulate` over configuration values.
    Sweep,
    /// Analytic-vs-numeric verification grid; exit 1 if any check fails.
    Verify,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            RunConfig::from_text(&text)
        }
        None if cli.command == Command::Verify => Ok(RunConfig::empty()),
        None => Err(CliError::Config(
            "--config is required for this command".into(),
        )),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let report = match cli.command {
        Command::Derive => commands::derive::run(&cfg)?,
        Command::Predict => commands::predict::run(&cfg)?,
        Command::Simulate => commands::simulate::run(&cfg)?,
        Command::Sweep => commands::sweep::run(&cfg)?,
        Command::Verify => commands::verify::run(&cfg)?,
    };
    let emitter = Emitter {
        format: cli.format,
        out_dir: cli.out.clone(),
    };
    emitter.emit(
        &cfg.resolved(),
        &report.summary,
        &report.table,
        report.table_file,
    )?;
    match report.status {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit()
        }
    }
}
