//! Side-by-side report over finished runs: per-metric mean and standard
//! deviation over each run's tail window, with deltas against the first.

use crate::manifest::RunManifest;
use crate::run::MANIFEST_FILE;
use anyhow::{bail, Context, Result};
use fermi6g::fed::{summarize, MetricStat, MetricsRow};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug)]
pub struct ComparedRun {
    pub label: String,
    pub stats: Vec<MetricStat>,
}

#[derive(Debug)]
pub struct Comparison {
    pub window: usize,
    pub runs: Vec<ComparedRun>,
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    let header = lines.next().context("metrics.csv is empty")?;
    let expected = MetricsRow::COLUMNS.join(",");
    if header != expected {
        bail!("schema mismatch: header '{header}' != '{expected}'");
    }
    let mut rows = Vec::new();
    for (ix, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != MetricsRow::COLUMNS.len() {
            bail!("row {}: {} fields, expected {}", ix + 2, fields.len(), 16);
        }
        let num =
            |col: usize| -> Result<f64> { fields[col].parse().context("bad numeric field") };
        rows.push(MetricsRow {
            episode: fields[0].parse().context("bad episode index")?,
            mean_reward: num(1)?,
            reliability: num(2)?,
            latency_s: num(3)?,
            completion_time_s: num(4)?,
            energy_per_task: num(5)?,
            energy_efficiency: num(6)?,
            spectral_efficiency: num(7)?,
            fairness_hybrid: num(8)?,
            fairness_jain: num(9)?,
            mac_success_rate: num(10)?,
            failure_rate: num(11)?,
            throughput_bps: num(12)?,
            offloading_delay_s: num(13)?,
            comm_bytes: fields[14].parse().context("bad comm bytes")?,
            model_divergence: num(15)?,
        });
    }
    Ok(rows)
}

fn load_run(dir: &Path) -> Result<(String, Vec<MetricsRow>, usize)> {
    let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
    let csv_path = dir.join("metrics.csv");
    let text = std::fs::read_to_string(&csv_path)
        .with_context(|| format!("reading {}", csv_path.display()))?;
    let rows =
        parse_metrics_csv(&text).with_context(|| format!("metrics {}", csv_path.display()))?;
    let label = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok((label, rows, manifest.config.smoothing_window))
}

/// Loads each run, takes the last `smoothing_window * 5` episodes (the
/// first run's window applies to all), and summarizes the thirteen metric
/// columns per run.
pub fn compare_runs(dirs: &[impl AsRef<Path>]) -> Result<Comparison> {
    if dirs.len() < 2 {
        bail!("compare needs at least two run directories");
    }
    let mut window = 0usize;
    let mut runs = Vec::new();
    for (ix, dir) in dirs.iter().enumerate() {
        let (label, rows, smoothing) = load_run(dir.as_ref())?;
        if ix == 0 {
            window = smoothing * 5;
        }
        if rows.is_empty() {
            bail!("{label}: no episodes logged");
        }
        let tail = &rows[rows.len().saturating_sub(window)..];
        runs.push(ComparedRun {
            label,
            stats: summarize(tail),
        });
    }
    Ok(Comparison { window, runs })
}

impl Comparison {
    /// Aligned text table: one row per metric, `mean ± std` per run, and a
    /// mean delta against the first run for every other run.
    pub fn table(&self) -> String {
        let mut s = String::new();
        write!(s, "{:<22}", format!("metric (last {} ep)", self.window)).expect("string write");
        for run in &self.runs {
            write!(s, " {:>24}", run.label).expect("string write");
        }
        for run in &self.runs[1..] {
            write!(s, " {:>14}", format!("d({})", run.label)).expect("string write");
        }
        s.push('\n');
        for (row_ix, base) in self.runs[0].stats.iter().enumerate() {
            write!(s, "{:<22}", base.name).expect("string write");
            for run in &self.runs {
                let st = &run.stats[row_ix];
                write!(s, " {:>24}", format!("{:.4} ± {:.4}", st.mean, st.std))
                    .expect("string write");
            }
            for run in &self.runs[1..] {
                write!(s, " {:>+14.4}", run.stats[row_ix].mean - base.mean)
                    .expect("string write");
            }
            s.push('\n');
        }
        s
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("metric");
        for run in &self.runs {
            write!(s, ",{}_mean,{}_std", run.label, run.label).expect("string write");
        }
        for run in &self.runs[1..] {
            write!(s, ",{}_delta", run.label).expect("string write");
        }
        s.push('\n');
        for (row_ix, base) in self.runs[0].stats.iter().enumerate() {
            write!(s, "{}", base.name).expect("string write");
            for run in &self.runs {
                let st = &run.stats[row_ix];
                write!(s, ",{},{}", st.mean, st.std).expect("string write");
            }
            for run in &self.runs[1..] {
                write!(s, ",{}", run.stats[row_ix].mean - base.mean).expect("string write");
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fermi6g::fed::metrics_to_csv;

    fn sample_row(ep: u64, reward: f64) -> MetricsRow {
        MetricsRow {
            episode: ep,
            mean_reward: reward,
            reliability: 0.5,
            latency_s: 1.0,
            completion_time_s: 2.0,
            energy_per_task: 0.1,
            energy_efficiency: 10.0,
            spectral_efficiency: 0.01,
            fairness_hybrid: 0.8,
            fairness_jain: 0.9,
            mac_success_rate: 0.7,
            failure_rate: 0.5,
            throughput_bps: 1e6,
            offloading_delay_s: 2.5,
            comm_bytes: 0,
            model_divergence: 0.0,
        }
    }

    #[test]
    fn csv_round_trip_preserves_rows() {
        let rows = vec![sample_row(0, 1.25), sample_row(1, -0.5)];
        let parsed = parse_metrics_csv(&metrics_to_csv(&rows)).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn wrong_header_is_a_schema_error() {
        let err = parse_metrics_csv("episode,reward\n0,1\n").unwrap_err();
        assert!(err.to_string().contains("schema mismatch"));
    }

    #[test]
    fn short_rows_are_rejected() {
        let good = metrics_to_csv(&[sample_row(0, 1.0)]);
        let truncated: String = good.lines().next().unwrap().to_string() + "\n0,1,2\n";
        assert!(parse_metrics_csv(&truncated).is_err());
    }
}
