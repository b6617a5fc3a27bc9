//! `geowarp` command-line interface.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod archive;
mod commands;
mod config;
mod error;
mod ingest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "geowarp",
    version,
    about = "Transformation-based spatial regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write tables, a report and a model archive.
    Fit(RunArgs),
    /// Predict at new sites from a model archive.
    Predict(RunArgs),
    /// Extract and export the Moran eigenvector basis.
    Basis(RunArgs),
    /// Gaussianize one column with 0..=D SAL layers and report moments.
    TransformCheck(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum YTypeArg {
    Continuous,
    Count,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; relative paths inside it resolve against its directory.
    #[arg(long)]
    config: PathBuf,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Eigenvalue cutoff as a fraction of the largest eigenvalue.
    #[arg(long)]
    threshold: Option<f64>,
    /// Number of SAL layers.
    #[arg(long)]
    tr_num: Option<usize>,
    #[arg(long, value_enum)]
    y_type: Option<YTypeArg>,
    /// Put a Box-Cox layer first (positive responses only).
    #[arg(long)]
    y_nonneg: bool,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            threshold: self.threshold,
            tr_num: self.tr_num,
            y_type: self.y_type.map(|t| match t {
                YTypeArg::Continuous => geowarp::YType::Continuous,
                YTypeArg::Count => geowarp::YType::Count,
            }),
            y_nonneg: self.y_nonneg,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&RunArgs, fn(&RunConfig) -> error::Result<()>) = match &cli.command {
        Command::Fit(a) => (a, commands::fit),
        Command::Predict(a) => (a, commands::predict),
        Command::Basis(a) => (a, commands::basis),
        Command::TransformCheck(a) => (a, commands::transform_check),
    };
    match RunConfig::load(&args.config, &args.overrides()).and_then(|c| run(&c)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.code() as u8)
        }
    }
}
