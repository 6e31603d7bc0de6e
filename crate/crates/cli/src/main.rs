//! Graph anomaly detection CLI: dataset injection, multi-view training,
//! fusion-weight heatmaps, view-count sweeps, and a decision-boundary demo.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gad_core::GadError;

use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "gad", version, about = "Multi-view graph anomaly detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an anomaly-injected copy of a dataset plus its injection report
    Inject(CommonArgs),
    /// Train over the configured seeds; writes run_result.json and curves
    Train(TrainArgs),
    /// Grid of frozen view-weight pairs vs. detection AUC (needs 2 views)
    Heatmap(CommonArgs),
    /// Detection AUC vs. number of fused views sampled from a pool
    SweepViews(CommonArgs),
    /// Point-cloud demo: train, then score a grid for contour plots
    DemoBoundary(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed list, e.g. --seeds 0,1,2
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the config's output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's parallel seed-worker count
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Evaluate view combinations ("gat,gin;gcn,gat,gin") and keep the one
    /// with the best mean validation AUC
    #[arg(long)]
    combos: Option<String>,
}

fn load(common: &CommonArgs) -> gad_core::Result<(ExperimentConfig, PathBuf)> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seeds) = &common.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(workers) = common.workers {
        config.workers = workers;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    let out = config.output_dir.clone();
    Ok((config, out))
}

fn dispatch(cli: Cli) -> gad_core::Result<()> {
    match cli.command {
        Command::Inject(common) => {
            let (config, out) = load(&common)?;
            commands::inject::run(&config, &out)
        }
        Command::Train(args) => {
            let (config, out) = load(&args.common)?;
            commands::train::run(&config, &out, args.combos.as_deref())
        }
        Command::Heatmap(common) => {
            let (config, out) = load(&common)?;
            commands::heatmap::run(&config, &out)
        }
        Command::SweepViews(common) => {
            let (config, out) = load(&common)?;
            commands::sweep::run(&config, &out)
        }
        Command::DemoBoundary(common) => {
            let (config, out) = load(&common)?;
            commands::demo::run(&config, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                GadError::Config(_) | GadError::Data(_) | GadError::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
