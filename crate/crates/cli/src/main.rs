//! `uqloc`: synthesize CSI datasets, train uncertainty-aware position
//! estimators, and score their accuracy and confidence calibration.

mod commands;
mod config;
mod pipeline;
mod report;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "uqloc",
    version,
    about = "CSI-based position regression with uncertainty quantification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `out_dir` key.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads. Results are identical for any value; 1 keeps the
    /// run fully sequential.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the scene into a dataset file.
    Generate(Common),
    /// Train the configured estimator and write checkpoints.
    Train(Common),
    /// Score a trained estimator on the test split.
    Evaluate(Common),
    /// Compare uncertainty inside and outside the holdout rectangle.
    Oos(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Generate(c) | Command::Train(c) | Command::Evaluate(c) | Command::Oos(c) => {
                c
            }
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    let common = cli.command.common();
    if common.parallel == 0 {
        bail!("--parallel must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.parallel)
        .build_global()
        .expect("global thread pool set once at startup");

    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out_dir = commands::resolve_out_dir(&config, common.out.as_ref())?;

    match &cli.command {
        Command::Generate(_) => commands::cmd_generate(&config, &out_dir),
        Command::Train(_) => commands::cmd_train(&config, &out_dir),
        Command::Evaluate(_) => commands::cmd_evaluate(&config, &out_dir).map(|_| ()),
        Command::Oos(c) => commands::cmd_oos(&c.config, &config, c.seed, &out_dir),
    }
}
