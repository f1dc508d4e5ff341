//! `rebias`: fit bias priors, rebias summary tables, run the synthetic
//! coverage study, and the prediction-powered and family-GWAS pipelines.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 malformed input or
//! arguments, 3 NPMLE not converged, 4 invalid prior file, 5 failed
//! replicates under `--strict`, 6 GWAS record with non-positive variance.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod io;
mod manifest;

use clap::{Parser, Subcommand};

use commands::{fit, gwas, ppi, rebias, simulate};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "rebias",
    version,
    about = "Empirical Bayes rebiasing of biased estimates"
)]
struct Cli {
    /// More log output (-v info, -vv debug); RUST_LOG takes precedence
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the bias prior from (id, b_hat, tau) rows
    Fit(fit::FitArgs),
    /// Rebiased intervals and p-values for a table of task summaries
    Rebias(rebias::RebiasArgs),
    /// Monte Carlo coverage and width study
    Simulate(simulate::SimulateArgs),
    /// Prediction-powered inference with rebiased intervals
    Ppi(ppi::PpiArgs),
    /// Rebiased discoveries from family-based GWAS summary statistics
    Gwas(gwas::GwasArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Fit(a) => fit::run(a),
        Command::Rebias(a) => rebias::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Ppi(a) => ppi::run(a),
        Command::Gwas(a) => gwas::run(a),
    }
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
