//! Decentralized recurrent Q-learner: network, prioritized replay, target
//! network and the epsilon-greedy behaviour policy, assembled per agent.

pub mod network;
pub mod replay;

pub use network::{
    Hidden, Layout, NetDims, NetError, Network, QTriple, TdOutcome, TrainSequence, ALL_HEADS,
};
pub use replay::{ReplayBuffer, ReplayError, SampledSequence, StoredSequence};

use crate::env::{ActionVector, AppAction};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

pub const EPS_START: f64 = 1.0;
pub const EPS_END: f64 = 0.05;
pub const EPS_DECAY: f64 = 0.995;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// One multiplicative decay step with a hard floor.
pub fn decay_epsilon(eps: f64) -> f64 {
    (eps * EPS_DECAY).max(EPS_END)
}

/// Index of the largest value; ties break toward the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (ix, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = ix;
        }
    }
    best
}

/// Per-head epsilon-greedy selection: each head independently explores with
/// probability `epsilon`, otherwise takes its argmax (ties toward the lowest
/// index). Draw order is app, mac, cpu.
pub fn select_action(q: &QTriple, epsilon: f64, rng: &mut ChaCha12Rng) -> ActionVector {
    let mut pick = |qs: &[f64]| -> usize {
        if rng.gen_range(0.0..1.0) < epsilon {
            rng.gen_range(0..qs.len())
        } else {
            argmax(qs)
        }
    };
    let app_ix = pick(&q.app);
    let mac = pick(&q.mac);
    let cpu_level = pick(&q.cpu);
    ActionVector {
        app: if app_ix == 0 {
            AppAction::Local
        } else {
            AppAction::Offload
        },
        mac,
        cpu_level,
    }
}

/// A complete learner for one agent: online and target networks, replay
/// buffer, recurrent state for the current episode, and exploration rate.
#[derive(Debug)]
pub struct DrqnAgent {
    pub net: Network,
    pub target: Network,
    pub replay: ReplayBuffer,
    pub epsilon: f64,
    hidden: Hidden,
    updates: u64,
    sync_freq: u64,
    head_mask: [bool; 3],
}

impl DrqnAgent {
    pub fn new(
        dims: NetDims,
        buffer_capacity: usize,
        sync_freq: u64,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let net = Network::init(dims, rng);
        let target = net.clone();
        Self {
            target,
            replay: ReplayBuffer::new(dims.obs, buffer_capacity),
            epsilon: EPS_START,
            hidden: Hidden::zeros(dims.hidden),
            updates: 0,
            sync_freq: sync_freq.max(1),
            head_mask: ALL_HEADS,
            net,
        }
    }

    /// Restricts which heads the learner trains (behaviour is up to the
    /// caller; see the app-only baseline).
    pub fn set_head_mask(&mut self, mask: [bool; 3]) {
        self.head_mask = mask;
    }

    /// Zeroes the recurrent state at an episode boundary.
    pub fn reset_hidden(&mut self) {
        self.hidden = Hidden::zeros(self.net.dims().hidden);
    }

    /// Advances the recurrent state on `obs` and returns the step's
    /// Q-values without selecting anything.
    pub fn q_step(&mut self, obs: &[f64]) -> Result<QTriple, AgentError> {
        Ok(self.net.forward_step(obs, &mut self.hidden)?)
    }

    /// Advances the recurrent state on `obs` and selects an action at the
    /// given exploration rate.
    pub fn act_with(
        &mut self,
        obs: &[f64],
        epsilon: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<ActionVector, AgentError> {
        let q = self.q_step(obs)?;
        Ok(select_action(&q, epsilon, rng))
    }

    /// Behaviour-policy action at the agent's current epsilon.
    pub fn act(&mut self, obs: &[f64], rng: &mut ChaCha12Rng) -> Result<ActionVector, AgentError> {
        self.act_with(obs, self.epsilon, rng)
    }

    pub fn store(&mut self, seq: StoredSequence) -> Result<usize, AgentError> {
        Ok(self.replay.push(seq)?)
    }

    /// One learner update: sample a prioritized batch, take a TD step,
    /// refresh priorities, and hard-sync the target on schedule. Returns
    /// `None` when the buffer is empty or the batch produced a non-finite
    /// loss (parameters are untouched in both cases).
    pub fn learn(
        &mut self,
        batch_size: usize,
        gamma: f64,
        lr: f64,
        clip_norm: f64,
        beta: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<Option<TdOutcome>, AgentError> {
        let picks = match self.replay.sample(batch_size, beta, rng) {
            Ok(p) => p,
            Err(ReplayError::Empty) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let slots: Vec<usize> = picks.iter().map(|p| p.slot).collect();
        let batch: Vec<TrainSequence> = picks
            .iter()
            .map(|p| TrainSequence {
                obs_ext: &p.seq.obs_ext,
                actions: &p.seq.actions,
                rewards: &p.seq.rewards,
                dones: &p.seq.dones,
                weight: p.weight,
            })
            .collect();
        let outcome = match self.net.td_update_heads(
            &self.target,
            &batch,
            gamma,
            lr,
            clip_norm,
            self.head_mask,
        ) {
            Ok(o) => o,
            Err(NetError::NonFiniteLoss) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        drop(batch);
        drop(picks);
        for (slot, td) in slots.iter().zip(&outcome.td_abs) {
            self.replay.update_priority(*slot, *td);
        }
        self.updates += 1;
        if self.updates % self.sync_freq == 0 {
            self.target.sync_from(&self.net);
        }
        Ok(Some(outcome))
    }

    pub fn decay_epsilon(&mut self) {
        self.epsilon = decay_epsilon(self.epsilon);
    }

    /// Installs globally aggregated parameters into both the online and the
    /// target network, as done after a federation round.
    pub fn adopt_global(&mut self, params: &[f64]) -> Result<(), AgentError> {
        self.net.set_params(params)?;
        self.target.set_params(params)?;
        Ok(())
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }
}
