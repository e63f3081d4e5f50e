//! Run manifests: a `key=value` record of everything needed to reproduce a
//! run, plus checksums of what it produced.

use crate::config;
use anyhow::{bail, Context, Result};
use fermi6g::fed::TrainingConfig;
use std::fmt::Write as _;
use std::path::Path;

/// The complete provenance of one run directory. Artifact paths are
/// relative to the directory holding the manifest; digests are SHA-256 in
/// lowercase hex. The embedded config is the fully resolved one, so
/// re-running `command` with it and `seed` regenerates every artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub started_utc: String,
    pub finished_utc: String,
    pub artifacts: Vec<(String, String)>,
    pub config: TrainingConfig,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "command={}", self.command).expect("string write");
        writeln!(out, "seed={}", self.seed).expect("string write");
        writeln!(out, "started_utc={}", self.started_utc).expect("string write");
        writeln!(out, "finished_utc={}", self.finished_utc).expect("string write");
        for (path, digest) in &self.artifacts {
            writeln!(out, "artifact.{path}={digest}").expect("string write");
        }
        let mut in_reward = false;
        for line in config::print_config(&self.config).lines() {
            if line.is_empty() {
                continue;
            }
            if line == "[reward]" {
                in_reward = true;
                continue;
            }
            let prefix = if in_reward { "config.reward." } else { "config." };
            writeln!(out, "{prefix}{line}").expect("string write");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut command = None;
        let mut seed = None;
        let mut started = None;
        let mut finished = None;
        let mut artifacts = Vec::new();
        let mut cfg_lines = String::new();
        let mut reward_lines = String::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("malformed manifest line '{line}'");
            };
            if let Some(k) = key.strip_prefix("config.reward.") {
                writeln!(reward_lines, "{k}={value}").expect("string write");
            } else if let Some(k) = key.strip_prefix("config.") {
                writeln!(cfg_lines, "{k}={value}").expect("string write");
            } else if let Some(p) = key.strip_prefix("artifact.") {
                artifacts.push((p.to_string(), value.to_string()));
            } else {
                match key {
                    "command" => command = Some(value.to_string()),
                    "seed" => seed = Some(value.parse().context("manifest seed")?),
                    "started_utc" => started = Some(value.to_string()),
                    "finished_utc" => finished = Some(value.to_string()),
                    other => bail!("unknown manifest key {other}"),
                }
            }
        }
        let config = config::parse_config(&format!("{cfg_lines}\n[reward]\n{reward_lines}"))
            .context("manifest config snapshot")?;
        Ok(Self {
            command: command.context("manifest missing command")?,
            seed: seed.context("manifest missing seed")?,
            started_utc: started.context("manifest missing started_utc")?,
            finished_utc: finished.context("manifest missing finished_utc")?,
            artifacts,
            config,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("manifest {}", path.display()))
    }
}
