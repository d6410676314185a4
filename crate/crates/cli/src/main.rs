use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use demand_frontier_cli::commands;
use demand_frontier_cli::{Outcome, RunConfig};

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (JSON); defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic panel in the ingestion CSV schema.
    Synth,
    /// Tune, optimize and evaluate portfolios; write the frontier.
    Run,
    /// Forecast accuracy against random group size.
    Aggstudy,
    /// Check a configuration without running anything.
    ValidateConfig,
    /// Parse every known output file in the output directory.
    CheckOutputs,
}

/// Forecast-based portfolio selection of household electricity demand.
#[derive(Parser)]
#[command(name = "demand-frontier", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn load(common: &Common) -> Result<RunConfig> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(cfg.resolve(common.seed, common.out.clone()))
}

fn execute(cli: Cli) -> Result<Outcome> {
    if let Some(jobs) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let cfg = load(&cli.common)?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Run => commands::run(&cfg),
        Command::Aggstudy => commands::aggstudy(&cfg),
        Command::ValidateConfig => commands::validate_config(&cfg),
        Command::CheckOutputs => {
            for p in commands::check_outputs(&cfg.output_dir)? {
                println!("ok {}", p.display());
            }
            Ok(Outcome::Complete)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEMAND_FRONTIER_LOG", "info"))
        .init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}
