//! Prioritized episode replay. Whole episode sequences are stored FIFO up to
//! a transition budget; sampling is proportional to priority^alpha via a
//! sum tree, with annealed importance-sampling weights.

use crate::env::ActionVector;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

pub const PER_ALPHA: f64 = 0.6;
pub const PER_ETA: f64 = 0.5;
pub const PER_EPSILON: f64 = 1e-3;
pub const PER_BETA_START: f64 = 0.4;
pub const PER_BETA_END: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("sequence fields misaligned: {0}")]
    Misaligned(String),
    #[error("sequence of {got} transitions exceeds buffer capacity {capacity}")]
    TooLong { got: usize, capacity: usize },
    #[error("cannot sample from an empty buffer")]
    Empty,
}

/// One stored episode trace for a single agent.
#[derive(Debug, Clone)]
pub struct StoredSequence {
    /// Observations for steps `0..=T` flattened row-major; the last row is
    /// the observation after the final step.
    pub obs_ext: Vec<f64>,
    pub actions: Vec<ActionVector>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Mean per-step latency relative to its deadline, in [0, 1].
    pub delay_norm: f64,
    /// Fraction of steps whose medium-access attempt was denied.
    pub interference: f64,
}

impl StoredSequence {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn validate(&self, obs_dim: usize) -> Result<(), ReplayError> {
        let t = self.actions.len();
        if t == 0 {
            return Err(ReplayError::Misaligned("empty sequence".into()));
        }
        if self.rewards.len() != t || self.dones.len() != t {
            return Err(ReplayError::Misaligned(format!(
                "actions {t}, rewards {}, dones {}",
                self.rewards.len(),
                self.dones.len()
            )));
        }
        if self.obs_ext.len() != (t + 1) * obs_dim {
            return Err(ReplayError::Misaligned(format!(
                "obs_ext len {} for {t} steps of width {obs_dim}",
                self.obs_ext.len()
            )));
        }
        Ok(())
    }
}

/// Reference to a sampled sequence plus its importance weight.
#[derive(Debug, Clone, Copy)]
pub struct SampledSequence<'a> {
    pub slot: usize,
    pub weight: f64,
    pub seq: &'a StoredSequence,
}

/// Binary indexed tree over leaf priorities supporting prefix-sum descent.
#[derive(Debug, Clone)]
struct SumTree {
    base: usize,
    tree: Vec<f64>,
}

impl SumTree {
    fn new(leaves: usize) -> Self {
        let base = leaves.next_power_of_two().max(1);
        Self {
            base,
            tree: vec![0.0; 2 * base],
        }
    }

    fn set(&mut self, leaf: usize, value: f64) {
        let mut node = self.base + leaf;
        self.tree[node] = value;
        while node > 1 {
            node /= 2;
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    fn get(&self, leaf: usize) -> f64 {
        self.tree[self.base + leaf]
    }

    fn total(&self) -> f64 {
        self.tree[1]
    }

    /// Finds the leaf containing `prefix` in the cumulative distribution.
    /// Never lands on a zero-mass leaf while the tree has positive total.
    fn descend(&self, mut prefix: f64) -> usize {
        let mut node = 1;
        while node < self.base {
            let left = 2 * node;
            if prefix < self.tree[left] || self.tree[left + 1] == 0.0 {
                node = left;
            } else {
                prefix -= self.tree[left];
                node = left + 1;
            }
        }
        node - self.base
    }
}

#[derive(Debug)]
pub struct ReplayBuffer {
    obs_dim: usize,
    capacity_transitions: usize,
    slots: Vec<Option<StoredSequence>>,
    order: std::collections::VecDeque<usize>,
    free: Vec<usize>,
    tree: SumTree,
    transitions: usize,
    max_priority: f64,
}

impl ReplayBuffer {
    pub fn new(obs_dim: usize, capacity_transitions: usize) -> Self {
        Self {
            obs_dim,
            capacity_transitions,
            slots: Vec::new(),
            order: std::collections::VecDeque::new(),
            free: Vec::new(),
            tree: SumTree::new(capacity_transitions.max(1)),
            transitions: 0,
            max_priority: 1.0,
        }
    }

    pub fn num_sequences(&self) -> usize {
        self.order.len()
    }

    pub fn transitions(&self) -> usize {
        self.transitions
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Inserts an episode at the running maximum priority so that fresh
    /// experience is sampled at least once before its TD error is known.
    /// Evicts oldest episodes until the transition budget holds.
    pub fn push(&mut self, seq: StoredSequence) -> Result<usize, ReplayError> {
        seq.validate(self.obs_dim)?;
        if seq.len() > self.capacity_transitions {
            return Err(ReplayError::TooLong {
                got: seq.len(),
                capacity: self.capacity_transitions,
            });
        }
        while self.transitions + seq.len() > self.capacity_transitions {
            self.evict_oldest();
        }
        let slot = match self.free.pop() {
            Some(s) => s,
            None => {
                self.slots.push(None);
                self.slots.len() - 1
            }
        };
        self.transitions += seq.len();
        self.slots[slot] = Some(seq);
        self.order.push_back(slot);
        self.tree.set(slot, self.max_priority.powf(PER_ALPHA));
        Ok(slot)
    }

    fn evict_oldest(&mut self) {
        if let Some(slot) = self.order.pop_front() {
            if let Some(seq) = self.slots[slot].take() {
                self.transitions -= seq.len();
            }
            self.tree.set(slot, 0.0);
            self.free.push(slot);
        }
    }

    /// Refreshes a sequence's priority from its latest mean absolute TD
    /// error, folding in queueing delay and interference pressure.
    pub fn update_priority(&mut self, slot: usize, td_abs: f64) {
        let Some(seq) = self.slots.get(slot).and_then(|s| s.as_ref()) else {
            return;
        };
        let raw = td_abs.abs() + PER_ETA * (seq.delay_norm + seq.interference) + PER_EPSILON;
        self.max_priority = self.max_priority.max(raw);
        self.tree.set(slot, raw.powf(PER_ALPHA));
    }

    /// Stratified proportional sampling of `batch` sequences (with
    /// replacement across strata). Importance weights are
    /// `(num_sequences * P)^-beta`, normalized by the batch maximum.
    pub fn sample<'a>(
        &'a self,
        batch: usize,
        beta: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<SampledSequence<'a>>, ReplayError> {
        if self.order.is_empty() || self.tree.total() <= 0.0 {
            return Err(ReplayError::Empty);
        }
        let total = self.tree.total();
        let n = self.order.len() as f64;
        let mut picks = Vec::with_capacity(batch);
        let mut max_w: f64 = 0.0;
        for k in 0..batch {
            let lo = total * k as f64 / batch as f64;
            let hi = total * (k + 1) as f64 / batch as f64;
            let u = rng.gen_range(lo..hi);
            let slot = self.tree.descend(u.min(total * (1.0 - 1e-12)));
            let mass = self.tree.get(slot);
            debug_assert!(mass > 0.0);
            let p = mass / total;
            let w = (n * p).powf(-beta);
            max_w = max_w.max(w);
            picks.push((slot, w));
        }
        Ok(picks
            .into_iter()
            .map(|(slot, w)| SampledSequence {
                slot,
                weight: w / max_w,
                seq: self.slots[slot].as_ref().expect("sampled live slot"),
            })
            .collect())
    }

    /// Linear interpolation of the importance exponent over training.
    pub fn beta_at(progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        PER_BETA_START + (PER_BETA_END - PER_BETA_START) * p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::AppAction;
    use crate::seeds;

    fn seq(len: usize, obs_dim: usize, tag: f64) -> StoredSequence {
        StoredSequence {
            obs_ext: vec![tag; (len + 1) * obs_dim],
            actions: vec![
                ActionVector {
                    app: AppAction::Local,
                    mac: 0,
                    cpu_level: 1,
                };
                len
            ],
            rewards: vec![tag; len],
            dones: vec![false; len],
            delay_norm: 0.2,
            interference: 0.1,
        }
    }

    #[test]
    fn rejects_misaligned_sequences() {
        let mut buf = ReplayBuffer::new(4, 100);
        let mut bad = seq(3, 4, 1.0);
        bad.rewards.pop();
        assert!(matches!(buf.push(bad), Err(ReplayError::Misaligned(_))));
        let mut short_obs = seq(3, 4, 1.0);
        short_obs.obs_ext.pop();
        assert!(buf.push(short_obs).is_err());
        assert!(matches!(
            buf.push(seq(200, 4, 1.0)),
            Err(ReplayError::TooLong { .. })
        ));
    }

    #[test]
    fn fifo_eviction_respects_transition_budget() {
        let mut buf = ReplayBuffer::new(2, 10);
        for k in 0..5 {
            buf.push(seq(3, 2, k as f64)).unwrap();
        }
        // 5 episodes of 3 transitions exceed 10; the two oldest must go.
        assert_eq!(buf.num_sequences(), 3);
        assert_eq!(buf.transitions(), 9);
        let mut rng = seeds::derive_rng(1, "replay-fifo", &[]);
        for s in buf.sample(32, 1.0, &mut rng).unwrap() {
            assert!(s.seq.rewards[0] >= 2.0, "evicted episode sampled");
        }
    }

    #[test]
    fn sampling_tracks_priority_mass() {
        let mut buf = ReplayBuffer::new(1, 1000);
        let a = buf.push(seq(1, 1, 0.0)).unwrap();
        let b = buf.push(seq(1, 1, 1.0)).unwrap();
        buf.update_priority(a, 0.0);
        buf.update_priority(b, 10.0);
        let mut rng = seeds::derive_rng(2, "replay-mass", &[]);
        let mut hits_b = 0usize;
        let draws = 4000usize;
        for _ in 0..draws / 4 {
            for s in buf.sample(4, 0.5, &mut rng).unwrap() {
                if s.slot == b {
                    hits_b += 1;
                }
            }
        }
        let pa = (0.0f64 + PER_ETA * 0.3 + PER_EPSILON).powf(PER_ALPHA);
        let pb = (10.0f64 + PER_ETA * 0.3 + PER_EPSILON).powf(PER_ALPHA);
        let expect = pb / (pa + pb);
        let got = hits_b as f64 / draws as f64;
        assert!(
            (got - expect).abs() < 0.05,
            "expected ~{expect:.3}, got {got:.3}"
        );
    }

    #[test]
    fn every_live_sequence_has_positive_sampling_probability() {
        let mut buf = ReplayBuffer::new(1, 1000);
        let mut slots = Vec::new();
        for k in 0..8 {
            slots.push(buf.push(seq(2, 1, k as f64)).unwrap());
        }
        for &s in &slots {
            // Zero TD still leaves the eta and epsilon floor.
            buf.update_priority(s, 0.0);
            assert!(buf.tree.get(s) > 0.0);
        }
        let mut rng = seeds::derive_rng(3, "replay-positive", &[]);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..400 {
            for s in buf.sample(8, 0.4, &mut rng).unwrap() {
                seen.insert(s.slot);
            }
        }
        for &s in &slots {
            assert!(seen.contains(&s), "slot {s} never sampled");
        }
    }

    #[test]
    fn importance_weights_are_normalized_and_favor_rare_picks() {
        let mut buf = ReplayBuffer::new(1, 1000);
        let a = buf.push(seq(1, 1, 0.0)).unwrap();
        let b = buf.push(seq(1, 1, 1.0)).unwrap();
        buf.update_priority(a, 0.05);
        buf.update_priority(b, 5.0);
        let mut rng = seeds::derive_rng(4, "replay-weights", &[]);
        let mut w_a: Option<f64> = None;
        let mut w_b: Option<f64> = None;
        for _ in 0..200 {
            for s in buf.sample(8, 0.6, &mut rng).unwrap() {
                assert!(s.weight > 0.0 && s.weight <= 1.0 + 1e-12);
                if s.slot == a {
                    w_a = Some(s.weight);
                } else {
                    w_b = Some(s.weight);
                }
            }
            if w_a.is_some() && w_b.is_some() {
                break;
            }
        }
        let (wa, wb) = (w_a.unwrap(), w_b.unwrap());
        assert!(wa > wb, "rare sequence should carry the larger weight");
        assert!((wa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_anneals_linearly() {
        assert!((ReplayBuffer::beta_at(0.0) - PER_BETA_START).abs() < 1e-12);
        assert!((ReplayBuffer::beta_at(1.0) - PER_BETA_END).abs() < 1e-12);
        assert!((ReplayBuffer::beta_at(0.5) - 0.7).abs() < 1e-12);
        assert!((ReplayBuffer::beta_at(2.0) - PER_BETA_END).abs() < 1e-12);
    }

    #[test]
    fn empty_buffer_refuses_to_sample() {
        let buf = ReplayBuffer::new(3, 10);
        let mut rng = seeds::derive_rng(5, "replay-empty", &[]);
        assert_eq!(buf.sample(4, 0.4, &mut rng).unwrap_err(), ReplayError::Empty);
    }
}
