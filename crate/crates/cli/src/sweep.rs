//! Scalability sweeps: rerun the experiment across agent counts with the
//! channel count scaled as k = ceil(3N/5), one summary row per count.

use crate::run::run_experiment;
use anyhow::{bail, Context, Result};
use fermi6g::fed::{summarize, TrainingConfig};
use log::info;
use std::fmt::Write as _;
use std::path::Path;

pub const SUMMARY_FILE: &str = "sweep_summary.csv";

/// Channel count for an agent count, floored at the simulator's two-channel
/// minimum.
pub fn sweep_channels(agents: usize) -> usize {
    ((3 * agents).div_ceil(5)).max(2)
}

pub struct SweepRow {
    pub agents: usize,
    pub channels: usize,
    /// Mean of each of the thirteen metric columns over the tail window.
    pub means: Vec<(&'static str, f64)>,
}

pub fn cmd_sweep(base: &TrainingConfig, counts: &[usize], out: &Path) -> Result<String> {
    if counts.is_empty() {
        bail!("sweep needs at least one agent count");
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let summary_path = out.join(SUMMARY_FILE);
    if summary_path.exists() {
        bail!(
            "{} already holds a sweep; pick a fresh output directory",
            out.display()
        );
    }

    let mut rows = Vec::new();
    for &n in counts {
        let mut cfg = base.clone();
        cfg.env.num_agents = n;
        cfg.env.num_channels = sweep_channels(n);
        let sub = out.join(format!("sweep_n{n:03}"));
        info!("sweep entry: N={n}, k={}", cfg.env.num_channels);
        let (output, _) = run_experiment(&cfg, &sub, false)?;
        let window = cfg.smoothing_window * 5;
        let tail = &output.rows[output.rows.len().saturating_sub(window)..];
        let means = summarize(tail)
            .into_iter()
            .map(|st| (st.name, st.mean))
            .collect();
        rows.push(SweepRow {
            agents: n,
            channels: cfg.env.num_channels,
            means,
        });
    }

    let mut csv = String::from("agents,channels");
    for (name, _) in &rows[0].means {
        write!(csv, ",{name}").expect("string write");
    }
    csv.push('\n');
    for row in &rows {
        write!(csv, "{},{}", row.agents, row.channels).expect("string write");
        for (_, mean) in &row.means {
            write!(csv, ",{mean}").expect("string write");
        }
        csv.push('\n');
    }
    std::fs::write(&summary_path, &csv)
        .with_context(|| format!("writing {}", summary_path.display()))?;

    let mut table = format!("{:>7} {:>9}", "agents", "channels");
    for (name, _) in &rows[0].means {
        write!(table, " {:>18}", name).expect("string write");
    }
    table.push('\n');
    for row in &rows {
        write!(table, "{:>7} {:>9}", row.agents, row.channels).expect("string write");
        for (_, mean) in &row.means {
            write!(table, " {:>18.6}", mean).expect("string write");
        }
        table.push('\n');
    }
    Ok(table)
}
