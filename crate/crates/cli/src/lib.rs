//! Command-line harness for `sigkern`: synthetic data, Gram matrices,
//! features, approximation errors, benchmarks and a classification run.

pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

pub use commands::{BenchRecord, BENCH_HEADER};
pub use config::{Command, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sigkern", version, about = "Signature kernels and random signature features")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; defaults to the configuration's `output`, then stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads (defaults to RAYON_NUM_THREADS or the core count).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Runs one command and writes its CSV output.
pub fn run(args: &Args) -> Result<(), CliError> {
    let mut cfg = config::load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let text = commands::execute(args.command, &cfg)?;
    match args.output.as_ref().or(cfg.output.as_ref()) {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|source| CliError::Output {
            path: "stdout".into(),
            source,
        }),
    }
}
