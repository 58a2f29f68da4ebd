//! `gbs`: densities, sampling, maximum likelihood and model comparison for
//! matrix-variate generalized Birnbaum-Saunders distributions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod data;
mod options;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use options::Options;

/// Bad flags, configuration or input files. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "gbs",
    version,
    about = "Matrix-variate generalized Birnbaum-Saunders toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log-density of each matrix in --data
    Density(Options),
    /// Draw --count matrices with --seed
    Sample(Options),
    /// Maximum likelihood fit with scalar scale
    Fit(Options),
    /// Gaussian baseline against Kotz fits over --s-grid, with BIC* grades
    Compare(Options),
    /// Run the built-in cross-checks
    Validate(Options),
}

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn run(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::Density(o) => commands::density(&o.resolve()?).map(|_| true),
        Command::Sample(o) => commands::sample(&o.resolve()?).map(|_| true),
        Command::Fit(o) => commands::fit(&o.resolve()?).map(|_| true),
        Command::Compare(o) => commands::compare(&o.resolve()?).map(|_| true),
        Command::Validate(o) => commands::validate(&o.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}
