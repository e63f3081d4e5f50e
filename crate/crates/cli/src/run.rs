//! Single-experiment execution: drive a [`Trainer`], write the run
//! directory (config echo, metrics, checkpoints, manifest) append-only.

use crate::config;
use crate::manifest::RunManifest;
use anyhow::{bail, Context, Result};
use fermi6g::agent::Network;
use fermi6g::fed::{
    metrics_to_csv, EvalSummary, PolicyKind, RoundOutcome, TrainOutput, Trainer, TrainingConfig,
};
use fermi6g::seeds;
use log::{debug, info};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn now_utc() -> String {
    chrono::Utc::now()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Append-only writer for one run directory: refuses directories that
/// already hold a manifest, records a digest for every file it writes, and
/// emits the manifest last.
pub struct RunWriter {
    dir: PathBuf,
    artifacts: Vec<(String, String)>,
}

impl RunWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        if dir.join(MANIFEST_FILE).exists() {
            bail!(
                "{} already contains a finished run; pick a fresh output directory",
                dir.display()
            );
        }
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if path.exists() {
            bail!("refusing to overwrite {}", path.display());
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push((rel.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    /// Records a file some other component already wrote under this run.
    pub fn add_existing(&mut self, rel: &str) -> Result<()> {
        let path = self.dir.join(rel);
        let bytes =
            std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        self.artifacts.push((rel.to_string(), sha256_hex(&bytes)));
        Ok(())
    }

    pub fn finish(
        self,
        command: &str,
        cfg: &TrainingConfig,
        started_utc: String,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            seed: cfg.seed,
            started_utc,
            finished_utc: now_utc(),
            artifacts: self.artifacts,
            config: cfg.clone(),
        };
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, manifest.render())
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

fn outcome_text(outcome: &RoundOutcome) -> String {
    match outcome {
        RoundOutcome::Broadcast => "broadcast".into(),
        RoundOutcome::Skipped => "skipped (no eligible agents)".into(),
        RoundOutcome::Aborted(why) => format!("aborted: {why}"),
    }
}

fn drive(trainer: &mut Trainer, cfg: &TrainingConfig) -> Result<TrainOutput> {
    let mut output = TrainOutput::default();
    let mut seen_rounds = 0;
    while trainer.episode() < cfg.episodes {
        let row = trainer.run_episode(&mut output)?;
        for ev in &output.rounds[seen_rounds..] {
            info!(
                "round {} after episode {}: {} [{} participants, {} B]",
                ev.round,
                ev.episode,
                outcome_text(&ev.outcome),
                ev.participants.len(),
                ev.comm_bytes
            );
        }
        seen_rounds = output.rounds.len();
        debug!(
            "episode {}: reward {:.4}, reliability {:.3}, eps {:.3}",
            row.episode,
            row.mean_reward,
            row.reliability,
            trainer.epsilon()
        );
        output.rows.push(row);
    }
    Ok(output)
}

pub fn summary_table(stats: &[fermi6g::fed::MetricStat]) -> String {
    let mut s = String::new();
    writeln!(s, "{:<22} {:>14} {:>14}", "metric", "mean", "std").expect("string write");
    for st in stats {
        writeln!(s, "{:<22} {:>14.6} {:>14.6}", st.name, st.mean, st.std).expect("string write");
    }
    s
}

fn summary_csv(stats: &[fermi6g::fed::MetricStat]) -> String {
    let mut s = String::from("metric,mean,std\n");
    for st in stats {
        writeln!(s, "{},{},{}", st.name, st.mean, st.std).expect("string write");
    }
    s
}

/// Trains per the config into `out`, optionally follows with greedy
/// evaluation rollouts, and writes every artifact plus the manifest.
pub fn run_experiment(
    cfg: &TrainingConfig,
    out: &Path,
    evaluate: bool,
) -> Result<(TrainOutput, Option<EvalSummary>)> {
    cfg.validate()?;
    let started = now_utc();
    let mut writer = RunWriter::create(out)?;
    let learned = cfg.policy != PolicyKind::Random;

    let mut trainer = Trainer::new(cfg.clone())?;
    if learned {
        let ckpt_dir = out.join("checkpoints");
        std::fs::create_dir_all(&ckpt_dir)
            .with_context(|| format!("creating {}", ckpt_dir.display()))?;
        trainer.set_checkpoint_dir(Some(ckpt_dir));
    }
    info!(
        "{} run: policy {}, {} agents, {} episodes, seed {}",
        if evaluate { "eval" } else { "train" },
        cfg.policy,
        cfg.env.num_agents,
        cfg.episodes,
        cfg.seed
    );
    let output = drive(&mut trainer, cfg)?;

    writer.write("config.txt", config::print_config(cfg).as_bytes())?;
    writer.write("metrics.csv", metrics_to_csv(&output.rows).as_bytes())?;

    let eval_summary = if evaluate {
        let episodes = cfg.smoothing_window as u64 * 5;
        let eval_seed = seeds::derive_u64(cfg.seed, "cli-eval", &[]);
        let summary = trainer.evaluate(episodes, eval_seed)?;
        writer.write("eval_metrics.csv", metrics_to_csv(&summary.rows).as_bytes())?;
        writer.write("eval_summary.csv", summary_csv(&summary.stats).as_bytes())?;
        writer.write("eval_summary.txt", summary_table(&summary.stats).as_bytes())?;
        Some(summary)
    } else {
        None
    };

    if learned {
        let params = trainer.agent_params(0).expect("learned policy has agents");
        let net = Network::from_params(trainer.dims(), params.to_vec())?;
        writer.write("checkpoint_final.bin", &net.to_bytes())?;
        let mut round_files: Vec<String> = std::fs::read_dir(out.join("checkpoints"))
            .context("listing checkpoints")?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        round_files.sort();
        for name in round_files {
            writer.add_existing(&format!("checkpoints/{name}"))?;
        }
    }

    let broadcasts = output
        .rounds
        .iter()
        .filter(|r| r.outcome == RoundOutcome::Broadcast)
        .count();
    info!(
        "finished: {} episodes, {} rounds ({} broadcast), {} faulted episodes",
        output.rows.len(),
        output.rounds.len(),
        broadcasts,
        output.faulted_episodes.len()
    );
    if let Some(last) = output.rows.last() {
        info!(
            "final episode: reward {:.4}, reliability {:.3}",
            last.mean_reward, last.reliability
        );
    }
    writer.finish(if evaluate { "eval" } else { "train" }, cfg, started)?;
    Ok((output, eval_summary))
}
