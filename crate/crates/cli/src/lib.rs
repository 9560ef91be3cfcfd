//! Command-line pipeline over `plab-core`: fits each allocator on the
//! training split, backtests it on both splits and writes plot-ready CSV and
//! JSON into an output directory.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod export;

pub use config::{RlConfig, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] plab_core::Error),
}

impl CliError {
    /// Message without the variant prefix.
    pub fn detail(&self) -> String {
        match self {
            CliError::Config(m) => m.clone(),
            other => other.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "plab", version, about = "Portfolio allocation lab: MVP, HRP and a DQN rebalancer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo mean-variance frontier, max-Sharpe and min-risk portfolios.
    Mvp(RunArgs),
    /// Hierarchical risk parity weights and linkage tree.
    Hrp(RunArgs),
    /// Train the Q-network agent, then evaluate it.
    RlTrain(RunArgs),
    /// Evaluate a previously trained agent.
    RlEval(EvalArgs),
    /// Collect test-phase Sharpe ratios into the comparison table.
    Compare(RunArgs),
    /// Write the bundled synthetic price fixture.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long, env = "PLAB_OUT")]
    pub out: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, env = "PLAB_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Model file; defaults to `rl_model.txt` in the output directory.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "data/synthetic_prices.csv")]
    pub output: PathBuf,
}

impl RunArgs {
    /// Config file with flag and environment overrides applied.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

/// Runs one command and returns the files it wrote, in write order.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Mvp(a) => commands::cmd_mvp(&a.resolve()?),
        Command::Hrp(a) => commands::cmd_hrp(&a.resolve()?),
        Command::RlTrain(a) => commands::cmd_rl_train(&a.resolve()?),
        Command::RlEval(a) => commands::cmd_rl_eval(&a.run.resolve()?, a.model.as_deref()),
        Command::Compare(a) => commands::cmd_compare(&a.resolve()?),
        Command::Synth(a) => commands::cmd_synth(&a.output),
    }
}
