//! Experiment config files: `KEY=value` lines, `#` comments, and an
//! optional `[reward]` section overriding individual reward weights.
//! Missing keys keep their defaults; unknown keys are rejected by name.

use anyhow::{anyhow, bail, Context, Result};
use fermi6g::fed::{PolicyKind, TrainingConfig};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

pub fn parse_config_file(path: &Path) -> Result<TrainingConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("config {}", path.display()))
}

pub fn parse_config(text: &str) -> Result<TrainingConfig> {
    let mut cfg = TrainingConfig::default();
    let mut in_reward = false;
    for (ix, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[reward]" {
            in_reward = true;
            continue;
        }
        if line.starts_with('[') {
            bail!("line {}: unknown section {line}", ix + 1);
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected KEY=value, got '{line}'", ix + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        let applied = if in_reward {
            apply_reward_key(&mut cfg, key, value)
        } else {
            apply_key(&mut cfg, key, value)
        };
        applied.with_context(|| format!("line {}", ix + 1))?;
    }
    cfg.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(cfg)
}

fn parse_as<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value for {key}: {e}"))
}

fn parse_pair(key: &str, value: &str) -> Result<(f64, f64)> {
    let Some((x, y)) = value.split_once(',') else {
        bail!("invalid value for {key}: expected X,Y");
    };
    Ok((parse_as(key, x.trim())?, parse_as(key, y.trim())?))
}

fn apply_key(cfg: &mut TrainingConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "POLICY" => {
            cfg.policy = PolicyKind::from_str(value).map_err(|e| anyhow!("POLICY: {e}"))?
        }
        "SEED" => cfg.seed = parse_as(key, value)?,
        "EPISODES" => cfg.episodes = parse_as(key, value)?,
        "NUM_AGENTS" => cfg.env.num_agents = parse_as(key, value)?,
        "NUM_CHANNELS" => cfg.env.num_channels = parse_as(key, value)?,
        "STEPS" => cfg.env.steps = parse_as(key, value)?,
        "GRID_SIZE" => cfg.env.grid_size = parse_as(key, value)?,
        "SERVER_POS" => cfg.env.server_pos = parse_pair(key, value)?,
        "RETRY_PROB" => cfg.env.retry_prob = parse_as(key, value)?,
        "NOISE_STD" => cfg.env.noise_std = parse_as(key, value)?,
        "TX_DELAY_S" => cfg.env.tx_delay_s = parse_as(key, value)?,
        "ENERGY_THRESHOLD" => cfg.env.energy_threshold = parse_as(key, value)?,
        "QUEUE_MAX" => cfg.env.queue_max = parse_as(key, value)?,
        "TASK_ARRIVAL_PROB" => cfg.env.task_arrival_prob = parse_as(key, value)?,
        "CHANNEL_CAPACITY" => cfg.env.channel_capacity = parse_as(key, value)?,
        "BUFFER" => cfg.buffer = parse_as(key, value)?,
        "BATCH" => cfg.batch = parse_as(key, value)?,
        "GAMMA" => cfg.gamma = parse_as(key, value)?,
        "LR" => cfg.lr = parse_as(key, value)?,
        "EPS_START" => cfg.eps_start = parse_as(key, value)?,
        "EPS_END" => cfg.eps_end = parse_as(key, value)?,
        "EPS_DECAY" => cfg.eps_decay = parse_as(key, value)?,
        "SYNC_FREQ" => cfg.sync_freq = parse_as(key, value)?,
        "SEQUENCE_LENGTH" => cfg.sequence_length = parse_as(key, value)?,
        "CLIP_NORM" => cfg.clip_norm = parse_as(key, value)?,
        "SMOOTHING_WINDOW" => cfg.smoothing_window = parse_as(key, value)?,
        "AGG_INTERVAL" => cfg.agg_interval = parse_as(key, value)?,
        "REWARD_ADAPTATION" => cfg.reward_adaptation = parse_as(key, value)?,
        "HIDDEN_WIDTH" => cfg.hidden_width = parse_as(key, value)?,
        other => bail!("unknown key {other}"),
    }
    Ok(())
}

fn apply_reward_key(cfg: &mut TrainingConfig, key: &str, value: &str) -> Result<()> {
    let w = &mut cfg.reward;
    let slot = match key {
        "LATENCY" => &mut w.latency,
        "ENERGY" => &mut w.energy,
        "FAIRNESS" => &mut w.fairness,
        "RELIABILITY" => &mut w.reliability,
        "SPECTRAL" => &mut w.spectral,
        "ENERGY_EFF" => &mut w.energy_eff,
        "MAC_SUCCESS" => &mut w.mac_success,
        "BETA_JAIN" => &mut w.beta_jain,
        "BETA_ENTROPY" => &mut w.beta_entropy,
        "LAMBDA_EXTRA" => &mut w.lambda_extra,
        other => bail!("unknown key {other} in [reward]"),
    };
    *slot = parse_as(key, value)?;
    Ok(())
}

/// Full echo of a config in the file format; `parse_config` of the output
/// reproduces the input config exactly.
pub fn print_config(cfg: &TrainingConfig) -> String {
    let e = &cfg.env;
    let w = &cfg.reward;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").expect("string write");
    kv("POLICY", cfg.policy.to_string());
    kv("SEED", cfg.seed.to_string());
    kv("EPISODES", cfg.episodes.to_string());
    kv("NUM_AGENTS", e.num_agents.to_string());
    kv("NUM_CHANNELS", e.num_channels.to_string());
    kv("STEPS", e.steps.to_string());
    kv("GRID_SIZE", e.grid_size.to_string());
    kv("SERVER_POS", format!("{},{}", e.server_pos.0, e.server_pos.1));
    kv("RETRY_PROB", e.retry_prob.to_string());
    kv("NOISE_STD", e.noise_std.to_string());
    kv("TX_DELAY_S", e.tx_delay_s.to_string());
    kv("ENERGY_THRESHOLD", e.energy_threshold.to_string());
    kv("QUEUE_MAX", e.queue_max.to_string());
    kv("TASK_ARRIVAL_PROB", e.task_arrival_prob.to_string());
    kv("CHANNEL_CAPACITY", e.channel_capacity.to_string());
    kv("BUFFER", cfg.buffer.to_string());
    kv("BATCH", cfg.batch.to_string());
    kv("GAMMA", cfg.gamma.to_string());
    kv("LR", cfg.lr.to_string());
    kv("EPS_START", cfg.eps_start.to_string());
    kv("EPS_END", cfg.eps_end.to_string());
    kv("EPS_DECAY", cfg.eps_decay.to_string());
    kv("SYNC_FREQ", cfg.sync_freq.to_string());
    kv("SEQUENCE_LENGTH", cfg.sequence_length.to_string());
    kv("CLIP_NORM", cfg.clip_norm.to_string());
    kv("SMOOTHING_WINDOW", cfg.smoothing_window.to_string());
    kv("AGG_INTERVAL", cfg.agg_interval.to_string());
    kv("REWARD_ADAPTATION", cfg.reward_adaptation.to_string());
    kv("HIDDEN_WIDTH", cfg.hidden_width.to_string());
    s.push_str("\n[reward]\n");
    let mut kv = |k: &str, v: f64| writeln!(s, "{k}={v}").expect("string write");
    kv("LATENCY", w.latency);
    kv("ENERGY", w.energy);
    kv("FAIRNESS", w.fairness);
    kv("RELIABILITY", w.reliability);
    kv("SPECTRAL", w.spectral);
    kv("ENERGY_EFF", w.energy_eff);
    kv("MAC_SUCCESS", w.mac_success);
    kv("BETA_JAIN", w.beta_jain);
    kv("BETA_ENTROPY", w.beta_entropy);
    kv("LAMBDA_EXTRA", w.lambda_extra);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_pure_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, TrainingConfig::default());
        assert_eq!(cfg.env.num_agents, 5);
        assert_eq!(cfg.episodes, 800);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config("# a comment\n\n  SEED=9\n").unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn round_trip_is_the_identity() {
        let cfg = TrainingConfig::default();
        assert_eq!(parse_config(&print_config(&cfg)).unwrap(), cfg);

        let mut cfg = TrainingConfig::default();
        cfg.policy = PolicyKind::Random;
        cfg.seed = 123456789;
        cfg.episodes = 37;
        cfg.env.num_agents = 8;
        cfg.env.num_channels = 2;
        cfg.env.server_pos = (12.5, 80.25);
        cfg.lr = 3.4e-4;
        cfg.reward_adaptation = true;
        cfg.reward.latency = 0.4;
        cfg.reward.energy = 0.05;
        cfg.reward.beta_jain = 0.25;
        cfg.reward.beta_entropy = 0.75;
        assert_eq!(parse_config(&print_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn zero_agents_is_rejected() {
        let err = parse_config("NUM_AGENTS=0").unwrap_err();
        assert!(err.to_string().contains("NUM_AGENTS"));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config("LEARNING_RATE=0.1").unwrap_err();
        assert!(format!("{err:#}").contains("LEARNING_RATE"));
        let err = parse_config("[reward]\nJAIN=1").unwrap_err();
        assert!(format!("{err:#}").contains("JAIN"));
    }

    #[test]
    fn malformed_lines_and_values_are_rejected() {
        assert!(parse_config("SEED").is_err());
        let err = parse_config("GAMMA=fast").unwrap_err();
        assert!(format!("{err:#}").contains("GAMMA"));
        assert!(parse_config("[optimizer]\nLR=1").is_err());
    }

    #[test]
    fn reward_section_overrides_and_is_validated() {
        let cfg = parse_config("[reward]\nLATENCY=0.5\nBETA_JAIN=0.3\nBETA_ENTROPY=0.7").unwrap();
        assert_eq!(cfg.reward.latency, 0.5);
        assert_eq!(cfg.reward.beta_jain, 0.3);
        // Blend weights must still sum to one.
        assert!(parse_config("[reward]\nBETA_JAIN=0.9").is_err());
    }

    #[test]
    fn keys_before_the_reward_section_stay_top_level() {
        let err = parse_config("[reward]\nSEED=1").unwrap_err();
        assert!(format!("{err:#}").contains("SEED"));
    }
}
