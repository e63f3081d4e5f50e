//! Multi-objective reward engine.
//!
//! Scores one agent-step from normalized latency and energy (both inverted so
//! lower is better), hybrid fairness (Jain index blended with channel access
//! entropy), task reliability, spectral efficiency, energy efficiency and MAC
//! success rate. Dynamic penalty factors halve the latency term when the
//! 2 s latency budget is exceeded and halve the energy term when remaining
//! energy falls below a threshold.
//!
//! The total is also reported as a layer decomposition: an application-layer
//! slice (latency plus the compute share of energy), a MAC-layer slice (the
//! transmit share of energy plus fairness), and a weighted bundle of the
//! remaining metrics. All functions here are pure.

use thiserror::Error;

/// Latency budget in seconds above which the dynamic latency penalty kicks in.
pub const LATENCY_PENALTY_BUDGET_S: f64 = 2.0;

/// Floor applied to spectral efficiency so its term never vanishes.
pub const METRIC_FLOOR: f64 = 0.01;

/// Floor on normalized latency before inversion, capping that term at 10x.
pub const LATENCY_INV_FLOOR: f64 = 0.1;

/// Floor on normalized energy before inversion. Energy per completed task is
/// two orders of magnitude below the battery cap, so the floor sits lower
/// than the latency one; the inverse still cannot exceed 50x.
pub const ENERGY_INV_FLOOR: f64 = 0.02;

/// Energy efficiency (MB per joule) that maps to a full score of 1.
pub const EE_REF_MB_PER_J: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("deadline must be positive, got {0}")]
    NonPositiveDeadline(f64),
    #[error("energy cap must be positive, got {0}")]
    NonPositiveEnergyCap(f64),
    #[error("energy total must be positive, got {0}")]
    NonPositiveEnergyTotal(f64),
    #[error("entropy needs at least two channels, got {0}")]
    TooFewChannels(usize),
    #[error("channel distribution sums to {0}, expected 1")]
    NotADistribution(f64),
    #[error("successes {succ} exceed attempts {total}")]
    SuccessesExceedAttempts { succ: u64, total: u64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Weight vector for the scalarized reward.
///
/// The seven metric weights are free nonnegative reals. `beta_jain` and
/// `beta_entropy` blend the two fairness measures and must sum to 1.
/// `lambda_extra` scales the bundle of auxiliary metrics (reliability,
/// spectral efficiency, energy efficiency, MAC success) in the layer
/// decomposition; at 1.0 the decomposed total equals the flat weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardWeights {
    pub latency: f64,
    pub energy: f64,
    pub fairness: f64,
    pub reliability: f64,
    pub spectral: f64,
    pub energy_eff: f64,
    pub mac_success: f64,
    pub beta_jain: f64,
    pub beta_entropy: f64,
    pub lambda_extra: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            latency: 0.25,
            energy: 0.20,
            fairness: 0.15,
            reliability: 0.15,
            spectral: 0.10,
            energy_eff: 0.10,
            mac_success: 0.05,
            beta_jain: 0.5,
            beta_entropy: 0.5,
            lambda_extra: 1.0,
        }
    }
}

impl RewardWeights {
    /// Coefficient of the latency term inside the application-layer slice.
    pub fn alpha(&self) -> f64 {
        self.latency
    }

    /// Coefficient of the energy terms in both layer slices.
    pub fn beta(&self) -> f64 {
        self.energy
    }

    /// Coefficient of the fairness term inside the MAC-layer slice.
    pub fn gamma_fair(&self) -> f64 {
        self.fairness
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let all = [
            self.latency,
            self.energy,
            self.fairness,
            self.reliability,
            self.spectral,
            self.energy_eff,
            self.mac_success,
            self.beta_jain,
            self.beta_entropy,
            self.lambda_extra,
        ];
        if let Some(w) = all.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(RewardError::InvalidWeights(format!(
                "weight {w} is negative or non-finite"
            )));
        }
        let beta_sum = self.beta_jain + self.beta_entropy;
        if (beta_sum - 1.0).abs() > 1e-9 {
            return Err(RewardError::InvalidWeights(format!(
                "fairness blend weights sum to {beta_sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// One agent-step's metric inputs to the reward.
///
/// Latency and energy are raw (normalization happens inside
/// [`total_reward`]); fairness, reliability, spectral efficiency, energy
/// efficiency and MAC success rate arrive already normalized by the caller.
#[derive(Debug, Clone, Default)]
pub struct MetricSample {
    /// Latency of the most recently finished task, seconds.
    pub latency_s: f64,
    /// Deadline used to normalize latency, seconds.
    pub deadline_s: f64,
    /// Energy consumed per successfully completed task so far this episode.
    /// Failures do not shrink this: wasted energy stays in the numerator
    /// while only real completions grow the denominator.
    pub energy_per_task: f64,
    /// Cap used to normalize energy (battery capacity, so 1.0).
    pub energy_cap: f64,
    /// Cumulative compute energy this episode, for the layer split.
    pub energy_comp: f64,
    /// Cumulative transmit energy this episode, for the layer split.
    pub energy_trans: f64,
    /// Remaining battery fraction, drives the energy penalty.
    pub energy_remaining: f64,
    /// Battery fraction below which the energy penalty doubles.
    pub energy_threshold: f64,
    /// Jain index over the agents' channel-success allocation.
    pub fairness_jain: f64,
    /// Mean normalized channel access entropy across agents.
    pub entropy_avg: f64,
    /// Rolling task success rate for this agent.
    pub reliability: f64,
    /// Spectral efficiency of the latest transmission, bps/Hz.
    pub spectral: f64,
    /// Energy efficiency: raw MB delivered per joule, normalized inside
    /// [`total_reward`].
    pub energy_eff: f64,
    /// This agent's MAC success rate so far.
    pub mac_rate: f64,
}

/// Per-term reward decomposition for one agent-step.
#[derive(Debug, Clone)]
pub struct RewardBreakdown {
    /// Application-layer slice: latency term plus compute share of energy.
    pub r_app: f64,
    /// MAC-layer slice: transmit share of energy plus fairness.
    pub r_mac: f64,
    /// Weighted bundle of reliability, SE, EE and MAC success.
    pub omega_extra: f64,
    pub p_dyn: f64,
    pub p_energy: f64,
    /// Inverse floored normalized latency (before penalty and weight).
    pub inv_latency: f64,
    /// Inverse floored normalized energy (before penalty and weight).
    pub inv_energy: f64,
    /// Full latency term: weight * inverse latency / penalty.
    pub latency_term: f64,
    /// Full energy term: weight * inverse energy / penalty.
    pub energy_term: f64,
    /// Hybrid fairness value used.
    pub fairness: f64,
    /// Floored spectral efficiency used.
    pub spectral: f64,
    /// Normalized energy efficiency used.
    pub energy_eff: f64,
    /// Fraction of episode energy attributed to computation.
    pub comp_share: f64,
    pub total: f64,
}

/// Latency divided by deadline.
pub fn normalized_latency(latency_s: f64, deadline_s: f64) -> Result<f64, RewardError> {
    if deadline_s <= 0.0 {
        return Err(RewardError::NonPositiveDeadline(deadline_s));
    }
    Ok(latency_s / deadline_s)
}

/// Energy divided by its cap.
pub fn normalized_energy(energy: f64, energy_cap: f64) -> Result<f64, RewardError> {
    if energy_cap <= 0.0 {
        return Err(RewardError::NonPositiveEnergyCap(energy_cap));
    }
    Ok(energy / energy_cap)
}

/// Jain fairness index (sum x)^2 / (n * sum x^2) over a nonnegative
/// allocation. An all-zero (or empty) allocation counts as perfectly fair.
pub fn jain_index(xs: &[f64]) -> f64 {
    let sum: f64 = xs.iter().sum();
    let sum_sq: f64 = xs.iter().map(|x| x * x).sum();
    if sum_sq <= 0.0 {
        return 1.0;
    }
    (sum * sum) / (xs.len() as f64 * sum_sq)
}

/// Shannon entropy of a channel-selection distribution, normalized by
/// log2(m) so the uniform distribution scores 1.
pub fn channel_entropy(p: &[f64], m: usize) -> Result<f64, RewardError> {
    if m < 2 {
        return Err(RewardError::TooFewChannels(m));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(RewardError::NotADistribution(sum));
    }
    let h: f64 = p
        .iter()
        .filter(|&&pc| pc > 0.0)
        .map(|&pc| -pc * pc.log2())
        .sum();
    Ok(h / (m as f64).log2())
}

/// Normalized entropy of raw per-channel selection counts. `None` when no
/// selections were recorded.
pub fn channel_entropy_from_counts(counts: &[u64], m: usize) -> Result<Option<f64>, RewardError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Ok(None);
    }
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    channel_entropy(&p, m).map(Some)
}

/// Blend of Jain fairness and average access entropy.
pub fn hybrid_fairness(f_jain: f64, h_avg: f64, weights: &RewardWeights) -> f64 {
    weights.beta_jain * f_jain + weights.beta_entropy * h_avg
}

/// Rolling success rate over a window of task outcomes. `None` when the
/// window is empty.
pub fn reliability(window: &[bool]) -> Option<f64> {
    if window.is_empty() {
        return None;
    }
    let succ = window.iter().filter(|&&s| s).count();
    Some(succ as f64 / window.len() as f64)
}

/// Spectral efficiency floored at 0.01 so the reward term never vanishes.
pub fn normalized_se(se: f64) -> f64 {
    se.max(METRIC_FLOOR)
}

/// Energy efficiency mapped into [0, 1] against the reference rate.
pub fn normalized_ee(ee: f64) -> f64 {
    (ee / EE_REF_MB_PER_J).clamp(0.0, 1.0)
}

/// Delivered data per joule.
pub fn energy_efficiency(throughput: f64, energy_total: f64) -> Result<f64, RewardError> {
    if energy_total <= 0.0 {
        return Err(RewardError::NonPositiveEnergyTotal(energy_total));
    }
    Ok(throughput / energy_total)
}

/// Fraction of MAC attempts that were granted. `None` when no attempts were
/// made.
pub fn mac_success_rate(succ: u64, total: u64) -> Result<Option<f64>, RewardError> {
    if succ > total {
        return Err(RewardError::SuccessesExceedAttempts { succ, total });
    }
    if total == 0 {
        return Ok(None);
    }
    Ok(Some(succ as f64 / total as f64))
}

/// Dynamic penalty factors: (latency penalty, energy penalty). Each is 2 when
/// its constraint is breached (latency strictly above the 2 s budget,
/// remaining energy strictly below the threshold) and 1 otherwise. The factor
/// divides its term, so a breach halves the corresponding score.
pub fn penalties(latency_s: f64, energy_remaining: f64, threshold: f64) -> (f64, f64) {
    let p_dyn = if latency_s > LATENCY_PENALTY_BUDGET_S {
        2.0
    } else {
        1.0
    };
    let p_energy = if energy_remaining < threshold { 2.0 } else { 1.0 };
    (p_dyn, p_energy)
}

/// Scores one agent-step and returns the full term breakdown.
///
/// The total is the weighted sum of: penalized inverse normalized latency,
/// penalized inverse normalized energy, hybrid fairness, reliability,
/// floored spectral efficiency, normalized energy efficiency and MAC success
/// rate. The decomposition splits the energy term between layers in
/// proportion to the compute/transmit energy actually spent (an even split
/// when neither has spent anything) and scales the auxiliary bundle by
/// `lambda_extra`.
pub fn total_reward(
    sample: &MetricSample,
    weights: &RewardWeights,
) -> Result<RewardBreakdown, RewardError> {
    weights.validate()?;
    let l_norm = normalized_latency(sample.latency_s, sample.deadline_s)?;
    let e_norm = normalized_energy(sample.energy_per_task, sample.energy_cap)?;
    let (p_dyn, p_energy) = penalties(
        sample.latency_s,
        sample.energy_remaining,
        sample.energy_threshold,
    );

    let inv_latency = 1.0 / l_norm.max(LATENCY_INV_FLOOR);
    let inv_energy = 1.0 / e_norm.max(ENERGY_INV_FLOOR);
    let latency_term = weights.latency * inv_latency / p_dyn;
    let energy_term = weights.energy * inv_energy / p_energy;

    let fairness = hybrid_fairness(sample.fairness_jain, sample.entropy_avg, weights);
    let spectral = normalized_se(sample.spectral);
    let energy_eff = normalized_ee(sample.energy_eff);

    let spent = sample.energy_comp + sample.energy_trans;
    let comp_share = if spent > 0.0 {
        sample.energy_comp / spent
    } else {
        0.5
    };

    let r_app = weights.alpha() * inv_latency / p_dyn
        + weights.beta() * comp_share * inv_energy / p_energy;
    let r_mac = weights.beta() * (1.0 - comp_share) * inv_energy / p_energy
        + weights.gamma_fair() * fairness;
    let omega_extra = weights.reliability * sample.reliability
        + weights.spectral * spectral
        + weights.energy_eff * energy_eff
        + weights.mac_success * sample.mac_rate;

    let total = r_app + r_mac + weights.lambda_extra * omega_extra;

    Ok(RewardBreakdown {
        r_app,
        r_mac,
        omega_extra,
        p_dyn,
        p_energy,
        inv_latency,
        inv_energy,
        latency_term,
        energy_term,
        fairness,
        spectral,
        energy_eff,
        comp_share,
        total,
    })
}

/// Episode-level moving averages consulted by the weight adaptation rule.
#[derive(Debug, Clone, Copy)]
pub struct MovingAverages {
    pub latency_s: f64,
    pub energy_remaining: f64,
    pub energy_threshold: f64,
    pub fairness: f64,
}

/// Optional weight adaptation: when enabled, bumps the latency, energy or
/// fairness weight by 10% if its moving-average metric breaches its
/// threshold, then renormalizes the seven metric weights to sum to 1. The
/// fairness blend and `lambda_extra` are left untouched.
pub fn adapt_weights(weights: &RewardWeights, avgs: &MovingAverages, enabled: bool) -> RewardWeights {
    let mut w = weights.clone();
    if !enabled {
        return w;
    }
    if avgs.latency_s > LATENCY_PENALTY_BUDGET_S {
        w.latency *= 1.1;
    }
    if avgs.energy_remaining < avgs.energy_threshold {
        w.energy *= 1.1;
    }
    if avgs.fairness < 0.5 {
        w.fairness *= 1.1;
    }
    let sum = w.latency
        + w.energy
        + w.fairness
        + w.reliability
        + w.spectral
        + w.energy_eff
        + w.mac_success;
    if sum > 0.0 {
        w.latency /= sum;
        w.energy /= sum;
        w.fairness /= sum;
        w.reliability /= sum;
        w.spectral /= sum;
        w.energy_eff /= sum;
        w.mac_success /= sum;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_all_ones() -> MetricSample {
        MetricSample {
            latency_s: 2.0,
            deadline_s: 2.0,
            energy_per_task: 1.0,
            energy_cap: 1.0,
            energy_comp: 0.6,
            energy_trans: 0.4,
            energy_remaining: 0.5,
            energy_threshold: 0.2,
            fairness_jain: 1.0,
            entropy_avg: 1.0,
            reliability: 1.0,
            spectral: 1.0,
            energy_eff: EE_REF_MB_PER_J,
            mac_rate: 1.0,
        }
    }

    fn unit_weights() -> RewardWeights {
        RewardWeights {
            latency: 1.0,
            energy: 1.0,
            fairness: 1.0,
            reliability: 1.0,
            spectral: 1.0,
            energy_eff: 1.0,
            mac_success: 1.0,
            beta_jain: 0.5,
            beta_entropy: 0.5,
            lambda_extra: 1.0,
        }
    }

    #[test]
    fn normalized_latency_ratios() {
        assert_eq!(normalized_latency(1.0, 2.0).unwrap(), 0.5);
        assert_eq!(normalized_latency(2.0, 2.0).unwrap(), 1.0);
        assert!((normalized_latency(1.12, 2.0).unwrap() - 0.56).abs() < 1e-12);
        assert!(normalized_latency(1.0, 0.0).is_err());
    }

    #[test]
    fn normalized_energy_ratios() {
        assert_eq!(normalized_energy(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(normalized_energy(1.0, 1.0).unwrap(), 1.0);
        assert!((normalized_energy(0.023, 1.0).unwrap() - 0.023).abs() < 1e-12);
        assert!(normalized_energy(0.5, -1.0).is_err());
    }

    #[test]
    fn jain_known_values() {
        assert!((jain_index(&[1.0, 1.0, 1.0, 1.0]) - 1.0).abs() < 1e-12);
        assert!((jain_index(&[1.0, 0.0, 0.0, 0.0]) - 0.25).abs() < 1e-12);
        assert!((jain_index(&[2.0, 1.0]) - 0.9).abs() < 1e-12);
        assert_eq!(jain_index(&[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(jain_index(&[]), 1.0);
    }

    #[test]
    fn entropy_known_values() {
        let uniform = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        assert!((channel_entropy(&uniform, 3).unwrap() - 1.0).abs() < 1e-12);
        assert!(channel_entropy(&[1.0, 0.0, 0.0], 3).unwrap().abs() < 1e-12);
        let two_of_three = channel_entropy(&[0.5, 0.5, 0.0], 3).unwrap();
        assert!((two_of_three - 1.0 / 3.0_f64.log2()).abs() < 1e-12);
        assert!((two_of_three - 0.6309).abs() < 1e-4);
        assert!(channel_entropy(&[1.0], 1).is_err());
        assert!(channel_entropy(&[0.7, 0.7], 2).is_err());
    }

    #[test]
    fn entropy_from_counts_handles_empty() {
        assert_eq!(channel_entropy_from_counts(&[0, 0, 0], 3).unwrap(), None);
        let h = channel_entropy_from_counts(&[5, 5, 0], 3).unwrap().unwrap();
        assert!((h - 1.0 / 3.0_f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn hybrid_fairness_blend() {
        let w = RewardWeights::default();
        assert_eq!(hybrid_fairness(1.0, 1.0, &w), 1.0);
        assert_eq!(hybrid_fairness(0.0, 0.0, &w), 0.0);
        assert!((hybrid_fairness(0.8, 0.6, &w) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn reliability_window() {
        assert_eq!(reliability(&[true, true, true, true]), Some(1.0));
        assert_eq!(reliability(&[true, true, false, true]), Some(0.75));
        assert_eq!(reliability(&[]), None);
    }

    #[test]
    fn se_floor() {
        assert_eq!(normalized_se(0.005), 0.01);
        assert_eq!(normalized_se(0.5), 0.5);
        assert_eq!(normalized_se(0.0), 0.01);
    }

    #[test]
    fn energy_efficiency_ratio() {
        assert_eq!(energy_efficiency(100.0, 2.0).unwrap(), 50.0);
        assert_eq!(energy_efficiency(0.0, 1.0).unwrap(), 0.0);
        assert!(energy_efficiency(1.0, 0.0).is_err());
    }

    #[test]
    fn ee_normalization_saturates_at_reference() {
        assert_eq!(normalized_ee(0.0), 0.0);
        assert_eq!(normalized_ee(50.0), 0.5);
        assert_eq!(normalized_ee(100.0), 1.0);
        assert_eq!(normalized_ee(250.0), 1.0);
    }

    #[test]
    fn mac_rate_cases() {
        assert_eq!(mac_success_rate(3, 4).unwrap(), Some(0.75));
        assert_eq!(mac_success_rate(0, 0).unwrap(), None);
        assert_eq!(mac_success_rate(4, 4).unwrap(), Some(1.0));
        assert!(mac_success_rate(5, 4).is_err());
    }

    #[test]
    fn penalty_table() {
        assert_eq!(penalties(2.5, 0.5, 0.2), (2.0, 1.0));
        assert_eq!(penalties(1.0, 0.1, 0.2), (1.0, 2.0));
        assert_eq!(penalties(2.0, 0.2, 0.2), (1.0, 1.0));
        assert_eq!(penalties(2.5, 0.1, 0.2), (2.0, 2.0));
    }

    #[test]
    fn total_with_unit_metrics_and_weights_is_seven() {
        let b = total_reward(&sample_all_ones(), &unit_weights()).unwrap();
        assert!((b.total - 7.0).abs() < 1e-9, "total {}", b.total);
        assert_eq!(b.p_dyn, 1.0);
        assert_eq!(b.p_energy, 1.0);
    }

    #[test]
    fn zero_weights_zero_total() {
        let w = RewardWeights {
            latency: 0.0,
            energy: 0.0,
            fairness: 0.0,
            reliability: 0.0,
            spectral: 0.0,
            energy_eff: 0.0,
            mac_success: 0.0,
            beta_jain: 0.5,
            beta_entropy: 0.5,
            lambda_extra: 0.0,
        };
        let b = total_reward(&sample_all_ones(), &w).unwrap();
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn fairness_weight_scales_only_fairness_term() {
        let sample = sample_all_ones();
        let w1 = RewardWeights::default();
        let mut w2 = w1.clone();
        w2.fairness *= 2.0;
        let b1 = total_reward(&sample, &w1).unwrap();
        let b2 = total_reward(&sample, &w2).unwrap();
        let delta = b2.total - b1.total;
        assert!((delta - w1.fairness * b1.fairness).abs() < 1e-12);
    }

    #[test]
    fn latency_penalty_halves_term_at_equal_normalized_latency() {
        let w = RewardWeights::default();
        let mut late = sample_all_ones();
        late.latency_s = 4.0;
        late.deadline_s = 2.0;
        let mut tight = sample_all_ones();
        tight.latency_s = 2.0;
        tight.deadline_s = 1.0;
        let b_late = total_reward(&late, &w).unwrap();
        let b_tight = total_reward(&tight, &w).unwrap();
        assert_eq!(b_late.p_dyn, 2.0);
        assert_eq!(b_tight.p_dyn, 1.0);
        assert!((b_late.latency_term - 0.5 * b_tight.latency_term).abs() < 1e-12);
    }

    #[test]
    fn energy_penalty_halves_energy_term() {
        let w = RewardWeights::default();
        let healthy = sample_all_ones();
        let mut drained = sample_all_ones();
        drained.energy_remaining = 0.1;
        let b_healthy = total_reward(&healthy, &w).unwrap();
        let b_drained = total_reward(&drained, &w).unwrap();
        assert_eq!(b_drained.p_energy, 2.0);
        assert!((b_drained.energy_term - 0.5 * b_healthy.energy_term).abs() < 1e-12);
        assert!(b_drained.total < b_healthy.total);
    }

    #[test]
    fn floors_bound_inverse_terms() {
        let mut s = sample_all_ones();
        s.latency_s = 0.0;
        s.energy_per_task = 0.0;
        let b = total_reward(&s, &RewardWeights::default()).unwrap();
        assert_eq!(b.inv_latency, 10.0);
        assert_eq!(b.inv_energy, 50.0);
    }

    #[test]
    fn adapt_disabled_is_identity() {
        let w = RewardWeights::default();
        let avgs = MovingAverages {
            latency_s: 5.0,
            energy_remaining: 0.0,
            energy_threshold: 0.2,
            fairness: 0.0,
        };
        assert_eq!(adapt_weights(&w, &avgs, false), w);
    }

    #[test]
    fn adapt_no_breach_keeps_normalized_defaults() {
        let w = RewardWeights::default();
        let avgs = MovingAverages {
            latency_s: 1.0,
            energy_remaining: 0.8,
            energy_threshold: 0.2,
            fairness: 0.9,
        };
        let w2 = adapt_weights(&w, &avgs, true);
        assert!((w2.latency - w.latency).abs() < 1e-12);
        assert!((w2.mac_success - w.mac_success).abs() < 1e-12);
    }

    #[test]
    fn adapt_latency_breach_raises_latency_share() {
        let w = RewardWeights::default();
        let avgs = MovingAverages {
            latency_s: 2.5,
            energy_remaining: 0.8,
            energy_threshold: 0.2,
            fairness: 0.9,
        };
        let w2 = adapt_weights(&w, &avgs, true);
        assert!(w2.latency / w2.energy > w.latency / w.energy);
        let sum = w2.latency
            + w2.energy
            + w2.fairness
            + w2.reliability
            + w2.spectral
            + w2.energy_eff
            + w2.mac_success;
        assert!((sum - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn jain_bounds(xs in proptest::collection::vec(0.0f64..100.0, 1..32)) {
            prop_assume!(xs.iter().any(|&x| x > 0.0));
            let j = jain_index(&xs);
            prop_assert!(j >= 1.0 / xs.len() as f64 - 1e-12);
            prop_assert!(j <= 1.0 + 1e-12);
        }

        #[test]
        fn entropy_bounds(raw in proptest::collection::vec(0.0f64..1.0, 2..8)) {
            let sum: f64 = raw.iter().sum();
            prop_assume!(sum > 1e-6);
            let p: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            let h = channel_entropy(&p, p.len()).unwrap();
            prop_assert!(h >= -1e-12);
            prop_assert!(h <= 1.0 + 1e-12);
        }

        #[test]
        fn decomposition_identity(
            latency in 0.0f64..10.0,
            energy in 0.0f64..1.0,
            comp in 0.0f64..0.5,
            trans in 0.0f64..0.5,
            remaining in 0.0f64..1.0,
            jain in 0.0f64..1.0,
            entropy in 0.0f64..1.0,
            rel in 0.0f64..1.0,
            se in 0.0f64..2.0,
            ee in 0.0f64..200.0,
            mac in 0.0f64..1.0,
            lambda in 0.0f64..3.0,
        ) {
            let sample = MetricSample {
                latency_s: latency,
                deadline_s: 2.0,
                energy_per_task: energy,
                energy_cap: 1.0,
                energy_comp: comp,
                energy_trans: trans,
                energy_remaining: remaining,
                energy_threshold: 0.2,
                fairness_jain: jain,
                entropy_avg: entropy,
                reliability: rel,
                spectral: se,
                energy_eff: ee,
                mac_rate: mac,
            };
            let mut w = RewardWeights::default();
            w.lambda_extra = lambda;
            let b = total_reward(&sample, &w).unwrap();
            prop_assert!((b.total - (b.r_app + b.r_mac + lambda * b.omega_extra)).abs() < 1e-9);
            // With lambda = 1 the decomposition collapses to the flat weighted sum.
            if (lambda - 1.0).abs() < 1e-12 {
                let flat = b.latency_term + b.energy_term
                    + w.fairness * b.fairness
                    + w.reliability * rel
                    + w.spectral * b.spectral
                    + w.energy_eff * b.energy_eff
                    + w.mac_success * mac;
                prop_assert!((b.total - flat).abs() < 1e-9);
            }
        }
    }
}
