//! `lossbar`: minima, paths, barcodes and index-r diagrams of loss landscapes
//! from a TOML run configuration.

mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::RunConfig;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "lossbar", version, about = "Barcodes of minima for loss landscapes")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for path and simplex optimization.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample local minima from seeded initializations.
    Minima,
    /// Optimize the path between two minima.
    Path {
        /// Minima JSON; defaults to `minima.file` or fresh sampling.
        minima: Option<PathBuf>,
    },
    /// Barcode of minima with JSON and SVG output.
    Barcode { minima: Option<PathBuf> },
    /// TO-score of a barcode file.
    Toscore { barcode: PathBuf },
    /// Index-r diagrams from the simplicial complex on the minima.
    Morse { minima: Option<PathBuf> },
    /// Compare the barcode with grid sublevel persistence.
    Compare,
    /// Barcodes of MLPs of increasing depth.
    DepthStudy,
    /// SVG plot of a barcode or diagrams file.
    Plot { input: PathBuf },
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::empty(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers.or(config.workers) {
        if workers == 0 {
            return Err(CliError::config("workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot start worker pool: {e}")))?;
    }
    let ctx = Context { config, out: cli.out };
    match &cli.command {
        Command::Minima => commands::minima(&ctx),
        Command::Path { minima } => commands::path(&ctx, minima.as_deref()),
        Command::Barcode { minima } => commands::barcode(&ctx, minima.as_deref()),
        Command::Toscore { barcode } => commands::toscore(&ctx, barcode),
        Command::Morse { minima } => commands::morse(&ctx, minima.as_deref()),
        Command::Compare => commands::compare(&ctx),
        Command::DepthStudy => commands::depth_study(&ctx),
        Command::Plot { input } => commands::plot(&ctx, input),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
