//! `tradecrew`: operate the multi-agent trading backtester end to end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 backend failure.

mod cmd;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, RunConfig};
use tradecrew_core::agents::{AgentError, Granularity};
use tradecrew_core::analysis::AnalysisError;

#[derive(Parser)]
#[command(
    name = "tradecrew",
    version,
    about = "Leakage-guarded multi-agent trading backtests"
)]
struct Cli {
    /// Structured run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts and manifest.json.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the fixture tree; exit 0 iff clean.
    Validate,
    /// Run the agent pipeline over the schedule and write backtest results.
    Backtest {
        /// Override the config's granularity (fine|coarse).
        #[arg(long)]
        granularity: Option<Granularity>,
        /// Run the all-agents configuration plus every leave-one-out mask.
        #[arg(long)]
        sweep_masks: bool,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Sharpe-difference tables from a fine and a coarse results directory.
    Compare {
        #[arg(long)]
        fine: PathBuf,
        #[arg(long)]
        coarse: PathBuf,
    },
    /// ERC composite over strategy directories and the index blend sweep.
    Optimize {
        /// Strategy result directories (repeat per strategy).
        #[arg(long = "strategy", required = true)]
        strategies: Vec<PathBuf>,
        /// CSV of monthly index returns (`month,return`).
        #[arg(long)]
        index: PathBuf,
        /// Portfolio size whose median result defines each strategy.
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Minimum months of history before the first composite weight.
        #[arg(long, default_value_t = 6)]
        min_window: usize,
    },
    /// Log-odds and similarity reports over transcript directories.
    AnalyzeText {
        /// Transcript directories (repeat per run).
        #[arg(long = "transcripts", required = true)]
        transcripts: Vec<PathBuf>,
    },
}

fn required_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!(ConfigError("--config is required".into())))?;
    Ok(RunConfig::load(path)?)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match &cli.command {
        Command::Validate => {
            let config = required_config(&cli)?;
            cmd::cmd_validate(&config, &cli.out)
        }
        Command::Backtest {
            granularity,
            sweep_masks,
            trials,
        } => {
            let mut config = required_config(&cli)?;
            if let Some(g) = granularity {
                config.granularity = *g;
            }
            if let Some(t) = trials {
                config.trials = *t;
            }
            config.validate()?;
            cmd::cmd_backtest(&config, &cli.out, *sweep_masks)?;
            Ok(true)
        }
        Command::Compare { fine, coarse } => {
            cmd::cmd_compare(fine, coarse, &cli.out)?;
            Ok(true)
        }
        Command::Optimize {
            strategies,
            index,
            n,
            min_window,
        } => {
            let config = required_config(&cli)?;
            cmd::cmd_optimize(&config, strategies, index, *n, *min_window, &cli.out)?;
            Ok(true)
        }
        Command::AnalyzeText { transcripts } => {
            let config = required_config(&cli)?;
            cmd::cmd_analyze_text(&config, transcripts, &cli.out)?;
            Ok(true)
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(agent) = cause.downcast_ref::<AgentError>() {
            return match agent {
                AgentError::Backend(_) | AgentError::ScriptMiss(_) => 3,
                _ => 1,
            };
        }
        if let Some(analysis) = cause.downcast_ref::<AnalysisError>() {
            return match analysis {
                AnalysisError::Backend(_) => 3,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
