//! Command-line front end: configuration files, CSV ingestion, seeded runs
//! and JSON reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

pub use commands::{Command, Outcome};
pub use config::Config;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "hdustat",
    version,
    about = "Change-point and relevant-difference tests built on vector-valued U-statistics"
)]
pub struct Args {
    /// What to run.
    #[arg(value_enum)]
    pub command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where to write the JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Runs one command and writes its report; returns the outcome for printing.
pub fn execute(args: &Args) -> CliResult<Outcome> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        cfg.set("seed", seed);
    }
    let start = Instant::now();
    let mut outcome = match args.threads {
        Some(0) => return Err(CliError::Config("--threads must be >= 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Io(format!("cannot start thread pool: {e}")))?
            .install(|| commands::run(args.command, cfg))?,
        None => commands::run(args.command, cfg)?,
    };
    outcome.report.wall_clock_seconds = start.elapsed().as_secs_f64();
    if let Some(out) = &args.out {
        outcome.report.write(out)?;
    }
    Ok(outcome)
}

/// Entry point shared by the binary: prints the summary and warnings and
/// returns the process exit code.
pub fn main_with_args(args: &Args) -> i32 {
    match execute(args) {
        Ok(outcome) => {
            for w in &outcome.report.diagnostics.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", outcome.summary);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
