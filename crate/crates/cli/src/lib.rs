//! Command-line experiment runner: train, eval, sweep and compare
//! subcommands over the fermi6g simulator, with append-only run
//! directories and manifest-backed reproducibility.

pub mod compare;
pub mod config;
pub mod manifest;
pub mod run;
pub mod sweep;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};
use fermi6g::fed::{PolicyKind, TrainingConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "fermi6g", version, about = "Federated RL experiments on a 6G edge simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train a policy; writes metrics.csv, checkpoints and a manifest.
    Train(RunArgs),
    /// Train, then report greedy-evaluation metrics (mean ± std).
    Eval(RunArgs),
    /// Repeat the experiment over several agent counts with scaled channels.
    Sweep {
        #[command(flatten)]
        args: RunArgs,
        /// Comma-separated agent counts, e.g. 5,10,50.
        #[arg(long, value_delimiter = ',', required = true)]
        agents: Vec<usize>,
    },
    /// Summarize finished runs side by side with deltas against the first.
    Compare {
        /// Run directories (at least two).
        dirs: Vec<PathBuf>,
        /// Directory for comparison.csv; omitted = print only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
pub struct RunArgs {
    /// Config file (KEY=value lines, optional [reward] section).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Policy override: fermi6g, fedmarl_baseline or random.
    #[arg(long)]
    pub policy: Option<PolicyKind>,
    /// Output directory; created if absent, never reused.
    #[arg(long)]
    pub out: PathBuf,
    /// Episode-count override.
    #[arg(long)]
    pub episodes: Option<u64>,
}

/// Config file merged with command-line overrides.
pub fn effective_config(args: &RunArgs) -> Result<TrainingConfig> {
    let mut cfg = match &args.config {
        Some(path) => config::parse_config_file(path)?,
        None => TrainingConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(policy) = args.policy {
        cfg.policy = policy;
    }
    if let Some(episodes) = args.episodes {
        cfg.episodes = episodes;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn level_from(value: Option<&str>) -> Result<log::LevelFilter> {
    match value {
        None => Ok(log::LevelFilter::Info),
        Some("error") => Ok(log::LevelFilter::Error),
        Some("info") => Ok(log::LevelFilter::Info),
        Some("debug") => Ok(log::LevelFilter::Debug),
        Some(other) => bail!("FERMI_LOG_LEVEL must be error, info or debug, got '{other}'"),
    }
}

pub fn init_logging() -> Result<()> {
    let var = std::env::var("FERMI_LOG_LEVEL").ok();
    let level = level_from(var.as_deref())?;
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = effective_config(&args)?;
            run::run_experiment(&cfg, &args.out, false)?;
            println!("run written to {}", args.out.display());
        }
        Command::Eval(args) => {
            let cfg = effective_config(&args)?;
            let (_, summary) = run::run_experiment(&cfg, &args.out, true)?;
            let summary = summary.expect("eval mode produces a summary");
            print!("{}", run::summary_table(&summary.stats));
            println!("run written to {}", args.out.display());
        }
        Command::Sweep { args, agents } => {
            let cfg = effective_config(&args)?;
            let table = sweep::cmd_sweep(&cfg, &agents, &args.out)?;
            print!("{table}");
            println!("sweep written to {}", args.out.display());
        }
        Command::Compare { dirs, out } => {
            let comparison = compare::compare_runs(&dirs)?;
            print!("{}", comparison.table());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)
                    .map_err(|e| anyhow!("creating {}: {e}", dir.display()))?;
                let path = dir.join("comparison.csv");
                if path.exists() {
                    bail!("refusing to overwrite {}", path.display());
                }
                std::fs::write(&path, comparison.csv())
                    .map_err(|e| anyhow!("writing {}: {e}", path.display()))?;
                println!("comparison written to {}", path.display());
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_levels_accept_exactly_the_documented_set() {
        assert_eq!(level_from(None).unwrap(), log::LevelFilter::Info);
        assert_eq!(level_from(Some("error")).unwrap(), log::LevelFilter::Error);
        assert_eq!(level_from(Some("info")).unwrap(), log::LevelFilter::Info);
        assert_eq!(level_from(Some("debug")).unwrap(), log::LevelFilter::Debug);
        assert!(level_from(Some("trace")).is_err());
        assert!(level_from(Some("INFO")).is_err());
    }

    #[test]
    fn cli_overrides_beat_the_config_file() {
        let args = RunArgs {
            config: None,
            seed: Some(99),
            policy: Some(PolicyKind::Random),
            out: PathBuf::from("unused"),
            episodes: Some(12),
        };
        let cfg = effective_config(&args).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.policy, PolicyKind::Random);
        assert_eq!(cfg.episodes, 12);
        assert_eq!(cfg.env.num_agents, 5);
    }

    #[test]
    fn command_line_parses() {
        let cli = Cli::try_parse_from([
            "fermi6g", "train", "--out", "runs/a", "--seed", "7", "--policy", "random",
        ])
        .unwrap();
        match cli.command {
            Command::Train(args) => {
                assert_eq!(args.seed, Some(7));
                assert_eq!(args.policy, Some(PolicyKind::Random));
            }
            _ => panic!("expected train"),
        }
        let cli = Cli::try_parse_from([
            "fermi6g", "sweep", "--out", "runs/s", "--agents", "5,10,50",
        ])
        .unwrap();
        match cli.command {
            Command::Sweep { agents, .. } => assert_eq!(agents, vec![5, 10, 50]),
            _ => panic!("expected sweep"),
        }
        assert!(Cli::try_parse_from(["fermi6g", "sweep", "--out", "x"]).is_err());
    }
}
