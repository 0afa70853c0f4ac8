use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{ModelKind, RunConfig};

/// Train and evaluate time-to-event models.
#[derive(Debug, Parser)]
#[command(name = "tte", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the artifact directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode and split the configured data; writes dataset.json and manifest.json.
    Prepare(Common),
    /// Train a model on the prepared dataset; writes a checkpoint and a JSONL log.
    Train {
        #[command(flatten)]
        common: Common,
        /// Model to train instead of the configured one.
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
    },
    /// Score a checkpoint on the test split; writes the report and a sample dump.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/<model>.checkpoint.json`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
    },
    /// Write the configured synthetic dataset as CSV plus schema.
    Synth(Common),
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.set_seed(seed);
    }
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(common) => {
            let manifest = commands::prepare(&load(&common)?)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        Command::Train { common, model } => {
            let mut config = load(&common)?;
            if let Some(kind) = model {
                config.set_model(kind);
            }
            let path = commands::train(&config)?;
            println!("{}", path.display());
        }
        Command::Evaluate {
            common,
            checkpoint,
            model,
        } => {
            let mut config = load(&common)?;
            if let Some(kind) = model {
                config.set_model(kind);
            }
            let checkpoint = checkpoint
                .unwrap_or_else(|| commands::checkpoint_path(&config.out, config.model.kind()));
            let report = commands::evaluate(&config, &checkpoint)?;
            println!("{}", report.to_json()?);
        }
        Command::Synth(common) => {
            let (csv, schema) = commands::synth(&load(&common)?)?;
            println!("{}\n{}", csv.display(), schema.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
