//! Command-line front end for the pairwise scholarly-novelty benchmark:
//! ingest a metadata snapshot, sample the pair dataset, build retrieval
//! indices, run judging strategies, and render report tables.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::build_index::{cmd_build_index, BuildIndexArgs};
use commands::ingest::{cmd_ingest, IngestArgs};
use commands::report::{cmd_report, ReportArgs};
use commands::run::{cmd_run, RunArgs};
use commands::sample::{cmd_sample, SampleArgs};

#[derive(Parser)]
#[command(
    name = "novbench",
    version,
    about = "Pairwise scholarly-novelty benchmark: dataset construction, judging runs, reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a raw metadata snapshot into a record store.
    Ingest(IngestArgs),
    /// Draw the labeled pair dataset from a record store.
    Sample(SampleArgs),
    /// Embed a per-field retrieval pool and persist the index.
    BuildIndex(BuildIndexArgs),
    /// Judge the pair dataset with the configured strategies.
    Run(RunArgs),
    /// Render tables from a finished trial ledger.
    Report(ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Sample(args) => cmd_sample(args),
        Command::BuildIndex(args) => cmd_build_index(args),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
