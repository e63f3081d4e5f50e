//! Comparison policies: a uniform-random control, a deterministic
//! round-robin medium-access scheduler, a least-used-channel heuristic, and
//! a partially-learning agent that trains only its offloading head.
//!
//! Baselines are allowed to read per-channel load counts, side information
//! the learned agents do not get; the heuristics are meant to be strong.

use crate::agent::{argmax, AgentError, DrqnAgent, NetDims, QTriple};
use crate::env::{ActionVector, AppAction, CPU_LEVELS};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Uniform draw over every head.
pub fn random_policy(num_channels: usize, rng: &mut ChaCha12Rng) -> ActionVector {
    ActionVector {
        app: if rng.gen_range(0..2) == 0 {
            AppAction::Local
        } else {
            AppAction::Offload
        },
        mac: rng.gen_range(0..num_channels),
        cpu_level: rng.gen_range(0..CPU_LEVELS),
    }
}

/// Deterministic schedule: agent `agent_id` uses channel
/// `(agent_id + step) mod k`, giving every channel an equal long-run share.
pub fn round_robin_mac(step: u64, agent_id: usize, k: usize) -> usize {
    ((agent_id as u64 + step) % k as u64) as usize
}

/// Channel with the smallest load; ties break toward the lowest index.
pub fn least_used_channel(loads: &[usize]) -> usize {
    let mut best = 0;
    for (ix, &l) in loads.iter().enumerate().skip(1) {
        if l < loads[best] {
            best = ix;
        }
    }
    best
}

/// Round-robin scheduler state for one agent: a cursor that walks the
/// channels starting from the agent's own offset. App and CPU choices stay
/// at their defaults (process locally at the baseline rate).
#[derive(Debug, Clone)]
pub struct RoundRobinPolicy {
    k: usize,
    cursor: usize,
}

impl RoundRobinPolicy {
    pub fn new(agent_id: usize, k: usize) -> Self {
        Self {
            k,
            cursor: agent_id % k,
        }
    }

    pub fn act(&mut self) -> ActionVector {
        let mac = self.cursor;
        self.cursor = (self.cursor + 1) % self.k;
        ActionVector {
            app: AppAction::Local,
            mac,
            cpu_level: 1,
        }
    }
}

/// App head epsilon-greedy, MAC from the least-used heuristic, CPU pinned
/// at the middle multiplier; the composite action of the app-only learner.
pub fn app_only_action(
    q: &QTriple,
    epsilon: f64,
    channel_loads: &[usize],
    rng: &mut ChaCha12Rng,
) -> ActionVector {
    let ix = if rng.gen_range(0.0..1.0) < epsilon {
        rng.gen_range(0..q.app.len())
    } else {
        argmax(&q.app)
    };
    ActionVector {
        app: if ix == 0 {
            AppAction::Local
        } else {
            AppAction::Offload
        },
        mac: least_used_channel(channel_loads),
        cpu_level: 1,
    }
}

/// Learner restricted to the offloading decision: the app head is trained
/// with the usual TD machinery while medium access always follows
/// [`least_used_channel`] and the CPU multiplier stays at level 1.
#[derive(Debug)]
pub struct AppOnlyLearner {
    pub agent: DrqnAgent,
}

impl AppOnlyLearner {
    pub fn new(
        dims: NetDims,
        buffer_capacity: usize,
        sync_freq: u64,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let mut agent = DrqnAgent::new(dims, buffer_capacity, sync_freq, rng);
        agent.set_head_mask([true, false, false]);
        Self { agent }
    }

    /// Epsilon-greedy on the app head only; the other two heads are fixed
    /// functions of the side information.
    pub fn act(
        &mut self,
        obs: &[f64],
        channel_loads: &[usize],
        rng: &mut ChaCha12Rng,
    ) -> Result<ActionVector, AgentError> {
        let q = self.agent.q_step(obs)?;
        Ok(app_only_action(&q, self.agent.epsilon, channel_loads, rng))
    }
}
