//! Discrete-time multi-agent edge-network world model.
//!
//! Each step advances one simulated second through a fixed phase order:
//! mobility, channel-gain refresh, queue expiry, action application with MAC
//! arbitration, service progress, then task arrivals. Agents run at most one
//! task at a time, either executing it locally at a chosen CPU level or
//! offloading it over a contended channel; everything else waits in a bounded
//! FIFO queue. All randomness comes from per-agent substreams plus a shared
//! arbitration stream, so trajectories are reproducible bit-for-bit from the
//! seed.

mod config;
mod task;

pub use config::{ConfigError, EnvConfig};
pub use task::{Task, TaskKind, TASK_KINDS};

use crate::reward::{self, MetricSample};
use crate::seeds;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use std::collections::VecDeque;
use std::f64::consts::TAU;
use thiserror::Error;

/// Observation feature count: queue length, energy, gain, task one-hot (3),
/// CPU usage, speed.
pub const OBS_DIM: usize = 8;
/// Application-layer actions: execute locally or offload.
pub const APP_ACTIONS: usize = 2;
/// Discrete CPU levels.
pub const CPU_LEVELS: usize = 3;
/// CPU frequency multipliers indexed by CPU level.
pub const CPU_MULTIPLIERS: [f64; CPU_LEVELS] = [0.5, 1.0, 1.5];
/// Simulated seconds per step.
pub const DT_S: f64 = 1.0;
/// Nominal channel bandwidth, feeds spectral-efficiency normalization only.
pub const BANDWIDTH_HZ: f64 = 150.0e9;
/// Rolling window length for task reliability and channel-choice entropy.
pub const METRIC_WINDOW: usize = 20;

/// Local execution rate at CPU multiplier 1.0, MB per second.
const LOCAL_RATE_MB_S: f64 = 1.0;
/// Compute energy per MB at CPU multiplier 1.0; scales with multiplier^2.
const COMPUTE_ENERGY_PER_MB: f64 = 0.02;
/// Battery cost of one MAC attempt, granted or not. High enough that a
/// denied-and-retried upload is never cheaper than computing locally.
const TX_ENERGY_PER_ATTEMPT: f64 = 0.03;
/// MAC attempts allowed per task before it is dropped.
const RETRY_LIMIT: u32 = 3;
/// Distance at which the path-loss term halves, meters.
const GAIN_HALF_DIST_M: f64 = 50.0;
const GAIN_FLOOR: f64 = 1e-4;
const VELOCITY_MIN_M_S: f64 = 0.1;
const VELOCITY_MAX_M_S: f64 = 1.0;
const HEADING_JITTER_RAD: f64 = std::f64::consts::FRAC_PI_4;
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("unknown agent id {0}")]
    UnknownAgent(usize),
    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },
    #[error("invalid action for agent {agent}: {reason}")]
    InvalidAction { agent: usize, reason: String },
}

/// Application-layer decision for the task at the head of the queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppAction {
    Local = 0,
    Offload = 1,
}

/// Cross-layer action triple emitted by a policy every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionVector {
    pub app: AppAction,
    /// Channel to request when offloading.
    pub mac: usize,
    /// Index into [`CPU_MULTIPLIERS`] for local execution speed.
    pub cpu_level: usize,
}

/// The partial, local view an agent's policy acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub queue_len_norm: f64,
    pub energy: f64,
    pub channel_gain: f64,
    /// One-hot class of the task in service (or next in queue); all zeros
    /// when the agent has nothing to do.
    pub task_kind: [f64; 3],
    pub cpu_usage: f64,
    pub mobility_speed_norm: f64,
}

impl Observation {
    pub fn features(&self) -> [f64; OBS_DIM] {
        [
            self.queue_len_norm,
            self.energy,
            self.channel_gain,
            self.task_kind[0],
            self.task_kind[1],
            self.task_kind[2],
            self.cpu_usage,
            self.mobility_speed_norm,
        ]
    }
}

/// What happened to one agent during one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    /// Latency of the task that finished this step, if any.
    pub latency_s: f64,
    pub energy_tx: f64,
    pub energy_comp: f64,
    pub task_finished: bool,
    pub task_succeeded: bool,
    pub mac_attempted: bool,
    pub mac_succeeded: bool,
    /// Bits of the task delivered on success this step.
    pub bits_delivered: u64,
    /// Spectral-efficiency sample of a transmission completed this step.
    pub se_bps_hz: f64,
}

impl StepOutcome {
    pub fn energy_spent(&self) -> f64 {
        self.energy_tx + self.energy_comp
    }
}

/// The one task an agent may be actively serving.
#[derive(Debug, Clone)]
enum Service {
    Idle,
    Local {
        task: Task,
        completes_at_s: f64,
        drain_per_s: f64,
        cpu_level: usize,
    },
    Transmit {
        task: Task,
        channel: usize,
        completes_at_s: f64,
        se_bps_hz: f64,
    },
}

/// Full simulator-side state of one agent, including episode accumulators
/// consumed by the reward and metrics layers.
#[derive(Debug, Clone)]
pub struct AgentSim {
    pub position: (f64, f64),
    pub velocity_m_s: f64,
    pub heading_rad: f64,
    pub queue: VecDeque<Task>,
    pub energy: f64,
    /// Channel gain cached at the start of the current step.
    pub gain: f64,
    service: Service,
    pub reliability_window: VecDeque<bool>,
    channel_choices: VecDeque<usize>,
    /// Latency of the most recently finished task (reward carry-forward).
    pub last_latency_s: f64,
    pub last_deadline_s: f64,
    pub last_se_bps_hz: f64,
    pub energy_comp_total: f64,
    pub energy_tx_total: f64,
    pub tasks_finished: u64,
    pub tasks_succeeded: u64,
    pub mac_attempts: u64,
    pub mac_successes: u64,
    pub mb_delivered: f64,
    pub latency_sum_s: f64,
    pub latency_count: u64,
    pub completion_sum_s: f64,
    pub offload_delay_sum_s: f64,
    pub offload_success_count: u64,
}

impl AgentSim {
    /// Fraction of CPU capacity in use: multiplier over the maximum
    /// multiplier while executing locally, 0 otherwise.
    pub fn cpu_usage(&self) -> f64 {
        match &self.service {
            Service::Local { cpu_level, .. } => {
                CPU_MULTIPLIERS[*cpu_level] / CPU_MULTIPLIERS[CPU_LEVELS - 1]
            }
            _ => 0.0,
        }
    }

    pub fn is_idle(&self) -> bool {
        matches!(self.service, Service::Idle)
    }

    fn current_kind(&self) -> Option<TaskKind> {
        match &self.service {
            Service::Local { task, .. } | Service::Transmit { task, .. } => Some(task.kind),
            Service::Idle => self.queue.front().map(|t| t.kind),
        }
    }

    /// Per-channel counts of recent channel choices.
    pub fn choice_counts(&self, num_channels: usize) -> Vec<u64> {
        let mut counts = vec![0u64; num_channels];
        for &c in &self.channel_choices {
            counts[c] += 1;
        }
        counts
    }

    fn push_window(window: &mut VecDeque<bool>, value: bool) {
        if window.len() == METRIC_WINDOW {
            window.pop_front();
        }
        window.push_back(value);
    }

    /// Books a finished task. `latency` is `None` for queue-overflow drops,
    /// which never started and carry no timing signal.
    fn record_finish(&mut self, success: bool, latency: Option<f64>, deadline_s: f64) {
        Self::push_window(&mut self.reliability_window, success);
        self.tasks_finished += 1;
        if success {
            self.tasks_succeeded += 1;
        }
        if let Some(l) = latency {
            self.latency_sum_s += l;
            self.latency_count += 1;
            self.last_latency_s = l;
            self.last_deadline_s = deadline_s;
            if success {
                self.completion_sum_s += l;
            }
        }
    }
}

/// One shared channel: a bandwidth figure and the transmissions in flight.
#[derive(Debug, Clone)]
pub struct ChannelSim {
    pub bandwidth_hz: f64,
    pub capacity: usize,
    /// (agent, completion time) pairs of transmissions holding a slot.
    in_flight: Vec<(usize, f64)>,
}

impl ChannelSim {
    pub fn load(&self) -> usize {
        self.in_flight.len()
    }

    pub fn occupants(&self) -> Vec<usize> {
        self.in_flight.iter().map(|&(agent, _)| agent).collect()
    }
}

/// The world model: agents, channels and the step clock.
pub struct EdgeSim {
    config: EnvConfig,
    step_idx: usize,
    agents: Vec<AgentSim>,
    channels: Vec<ChannelSim>,
    agent_rngs: Vec<ChaCha12Rng>,
    mac_rng: ChaCha12Rng,
}

impl EdgeSim {
    /// Builds the initial state: agents placed uniformly on the grid with
    /// full batteries and one queued task of a random class each.
    pub fn new(config: &EnvConfig, seed: u64) -> Result<Self, EnvError> {
        config.validate()?;
        let n = config.num_agents;
        let mut agent_rngs: Vec<ChaCha12Rng> = (0..n)
            .map(|i| seeds::derive_rng(seed, "env-agent", &[i as u64]))
            .collect();
        let mut agents = Vec::with_capacity(n);
        for rng in agent_rngs.iter_mut() {
            let position = (
                rng.gen_range(0.0..=config.grid_size),
                rng.gen_range(0.0..=config.grid_size),
            );
            let heading_rad = rng.gen_range(0.0..TAU);
            let velocity_m_s = rng.gen_range(VELOCITY_MIN_M_S..=VELOCITY_MAX_M_S);
            let kind = draw_kind(rng);
            let mut queue = VecDeque::new();
            queue.push_back(Task::new(kind, 0.0));
            agents.push(AgentSim {
                position,
                velocity_m_s,
                heading_rad,
                queue,
                energy: 1.0,
                gain: 0.0,
                service: Service::Idle,
                reliability_window: VecDeque::new(),
                channel_choices: VecDeque::new(),
                last_latency_s: 2.0,
                last_deadline_s: 2.0,
                last_se_bps_hz: 0.0,
                energy_comp_total: 0.0,
                energy_tx_total: 0.0,
                tasks_finished: 0,
                tasks_succeeded: 0,
                mac_attempts: 0,
                mac_successes: 0,
                mb_delivered: 0.0,
                latency_sum_s: 0.0,
                latency_count: 0,
                completion_sum_s: 0.0,
                offload_delay_sum_s: 0.0,
                offload_success_count: 0,
            });
        }
        let channels = (0..config.num_channels)
            .map(|_| ChannelSim {
                bandwidth_hz: BANDWIDTH_HZ,
                capacity: config.channel_capacity,
                in_flight: Vec::new(),
            })
            .collect();
        let mac_rng = seeds::derive_rng(seed, "env-mac", &[]);
        let mut sim = Self {
            config: config.clone(),
            step_idx: 0,
            agents,
            channels,
            agent_rngs,
            mac_rng,
        };
        for i in 0..n {
            refresh_gain(&sim.config, &mut sim.agents[i], &mut sim.agent_rngs[i]);
        }
        Ok(sim)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn num_agents(&self) -> usize {
        self.config.num_agents
    }

    pub fn num_channels(&self) -> usize {
        self.config.num_channels
    }

    pub fn step_index(&self) -> usize {
        self.step_idx
    }

    pub fn agents(&self) -> &[AgentSim] {
        &self.agents
    }

    pub fn channels(&self) -> &[ChannelSim] {
        &self.channels
    }

    /// Transmissions currently holding a slot, per channel.
    pub fn channel_loads(&self) -> Vec<usize> {
        self.channels.iter().map(|c| c.load()).collect()
    }

    pub fn agent_energy(&self, agent: usize) -> Result<f64, EnvError> {
        Ok(self.agents.get(agent).ok_or(EnvError::UnknownAgent(agent))?.energy)
    }

    /// Overrides an agent's battery level; used by experiment harnesses to
    /// force eligibility edge cases.
    pub fn set_agent_energy(&mut self, agent: usize, energy: f64) -> Result<(), EnvError> {
        let a = self
            .agents
            .get_mut(agent)
            .ok_or(EnvError::UnknownAgent(agent))?;
        a.energy = energy.clamp(0.0, 1.0);
        Ok(())
    }

    /// The local view fed to agent `agent`'s policy.
    pub fn observe(&self, agent: usize) -> Result<Observation, EnvError> {
        let a = self.agents.get(agent).ok_or(EnvError::UnknownAgent(agent))?;
        Ok(Observation {
            queue_len_norm: a.queue.len() as f64 / self.config.queue_max as f64,
            energy: a.energy,
            channel_gain: a.gain,
            task_kind: a
                .current_kind()
                .map(TaskKind::one_hot)
                .unwrap_or([0.0; 3]),
            cpu_usage: a.cpu_usage(),
            mobility_speed_norm: a.velocity_m_s / VELOCITY_MAX_M_S,
        })
    }

    /// Advances one simulated second under the given joint action.
    pub fn step(&mut self, actions: &[ActionVector]) -> Result<Vec<StepOutcome>, EnvError> {
        let n = self.config.num_agents;
        let k = self.config.num_channels;
        if actions.len() != n {
            return Err(EnvError::WrongActionCount {
                expected: n,
                got: actions.len(),
            });
        }
        for (i, a) in actions.iter().enumerate() {
            if a.mac >= k {
                return Err(EnvError::InvalidAction {
                    agent: i,
                    reason: format!("channel {} out of range (k={k})", a.mac),
                });
            }
            if a.cpu_level >= CPU_LEVELS {
                return Err(EnvError::InvalidAction {
                    agent: i,
                    reason: format!("cpu level {} out of range", a.cpu_level),
                });
            }
        }

        let t0 = self.step_idx as f64 * DT_S;
        let t1 = t0 + DT_S;
        let mut outcomes = vec![StepOutcome::default(); n];

        // Mobility and channel gains.
        for i in 0..n {
            update_mobility(&self.config, &mut self.agents[i], &mut self.agent_rngs[i]);
            refresh_gain(&self.config, &mut self.agents[i], &mut self.agent_rngs[i]);
        }

        // Queued tasks whose deadline already passed can no longer succeed.
        for i in 0..n {
            let mut kept = VecDeque::new();
            while let Some(task) = self.agents[i].queue.pop_front() {
                if t0 >= task.deadline_at() - TIME_EPS {
                    let latency = t0 - task.created_s;
                    self.agents[i].record_finish(false, Some(latency), task.kind.deadline_s());
                    outcomes[i].task_finished = true;
                } else {
                    kept.push_back(task);
                }
            }
            self.agents[i].queue = kept;
        }

        // Apply actions: idle agents either start local execution or place a
        // MAC request for the head-of-queue task.
        let mut requests: Vec<Vec<usize>> = vec![Vec::new(); k];
        for i in 0..n {
            if !self.agents[i].is_idle() || self.agents[i].queue.is_empty() {
                continue;
            }
            match actions[i].app {
                AppAction::Local => {
                    let agent = &mut self.agents[i];
                    let task = agent.queue.pop_front().expect("non-empty queue");
                    let mult = CPU_MULTIPLIERS[actions[i].cpu_level];
                    let duration = task.kind.size_mb() / (LOCAL_RATE_MB_S * mult);
                    let total_energy = COMPUTE_ENERGY_PER_MB * task.kind.size_mb() * mult * mult;
                    agent.service = Service::Local {
                        completes_at_s: t0 + duration,
                        drain_per_s: total_energy / duration,
                        cpu_level: actions[i].cpu_level,
                        task,
                    };
                }
                AppAction::Offload => {
                    let agent = &mut self.agents[i];
                    let task = agent.queue.front_mut().expect("non-empty queue");
                    task.attempts += 1;
                    if task.first_attempt_s.is_none() {
                        task.first_attempt_s = Some(t0);
                    }
                    agent.mac_attempts += 1;
                    if agent.channel_choices.len() == METRIC_WINDOW {
                        agent.channel_choices.pop_front();
                    }
                    agent.channel_choices.push_back(actions[i].mac);
                    agent.energy = (agent.energy - TX_ENERGY_PER_ATTEMPT).max(0.0);
                    agent.energy_tx_total += TX_ENERGY_PER_ATTEMPT;
                    outcomes[i].energy_tx += TX_ENERGY_PER_ATTEMPT;
                    outcomes[i].mac_attempted = true;
                    requests[actions[i].mac].push(i);
                }
            }
        }

        // Arbitration: free slots go to a uniform random subset of the
        // requesters; the rest are denied and either retry or drop the task.
        for c in 0..k {
            let free = self.channels[c]
                .capacity
                .saturating_sub(self.channels[c].in_flight.len());
            let req = std::mem::take(&mut requests[c]);
            let granted: Vec<usize> = if req.len() <= free {
                req.clone()
            } else {
                let mut pool = req.clone();
                for j in 0..free {
                    let pick = self.mac_rng.gen_range(j..pool.len());
                    pool.swap(j, pick);
                }
                pool.truncate(free);
                pool.sort_unstable();
                pool
            };
            for &i in &granted {
                let agent = &mut self.agents[i];
                let task = agent.queue.pop_front().expect("granted agent has a task");
                agent.mac_successes += 1;
                outcomes[i].mac_succeeded = true;
                let se_bps_hz = agent.gain * task.kind.size_bits() as f64
                    / (self.channels[c].bandwidth_hz * self.config.tx_delay_s);
                let completes_at_s = t0 + self.config.tx_delay_s;
                self.channels[c].in_flight.push((i, completes_at_s));
                agent.service = Service::Transmit {
                    channel: c,
                    completes_at_s,
                    se_bps_hz,
                    task,
                };
            }
            for &i in req.iter().filter(|i| !granted.contains(i)) {
                let survives = {
                    let task = self.agents[i].queue.front().expect("denied agent has a task");
                    task.attempts < RETRY_LIMIT
                        && self.agent_rngs[i].gen::<f64>() < self.config.retry_prob
                };
                if !survives {
                    let agent = &mut self.agents[i];
                    let task = agent.queue.pop_front().expect("denied agent has a task");
                    let latency = t1 - task.created_s;
                    agent.record_finish(false, Some(latency), task.kind.deadline_s());
                    outcomes[i].task_finished = true;
                }
            }
        }

        // Progress running services; complete those that finish this second.
        for i in 0..n {
            let service = std::mem::replace(&mut self.agents[i].service, Service::Idle);
            match service {
                Service::Idle => {}
                Service::Local {
                    task,
                    completes_at_s,
                    drain_per_s,
                    cpu_level,
                } => {
                    let active = (completes_at_s.min(t1) - t0).max(0.0);
                    let drained = drain_per_s * active;
                    let agent = &mut self.agents[i];
                    agent.energy = (agent.energy - drained).max(0.0);
                    agent.energy_comp_total += drained;
                    outcomes[i].energy_comp += drained;
                    if completes_at_s <= t1 + TIME_EPS {
                        let latency = completes_at_s - task.created_s;
                        let success = latency <= task.kind.deadline_s() + TIME_EPS;
                        agent.record_finish(success, Some(latency), task.kind.deadline_s());
                        outcomes[i].task_finished = true;
                        outcomes[i].task_succeeded = success;
                        outcomes[i].latency_s = latency;
                        if success {
                            outcomes[i].bits_delivered = task.kind.size_bits();
                            agent.mb_delivered += task.kind.size_mb();
                        }
                    } else {
                        agent.service = Service::Local {
                            task,
                            completes_at_s,
                            drain_per_s,
                            cpu_level,
                        };
                    }
                }
                Service::Transmit {
                    task,
                    channel,
                    completes_at_s,
                    se_bps_hz,
                } => {
                    if completes_at_s <= t1 + TIME_EPS {
                        self.channels[channel]
                            .in_flight
                            .retain(|&(agent, _)| agent != i);
                        let agent = &mut self.agents[i];
                        let latency = completes_at_s - task.created_s;
                        let success = latency <= task.kind.deadline_s() + TIME_EPS;
                        agent.record_finish(success, Some(latency), task.kind.deadline_s());
                        outcomes[i].task_finished = true;
                        outcomes[i].task_succeeded = success;
                        outcomes[i].latency_s = latency;
                        if success {
                            outcomes[i].bits_delivered = task.kind.size_bits();
                            agent.mb_delivered += task.kind.size_mb();
                            agent.last_se_bps_hz = se_bps_hz;
                            outcomes[i].se_bps_hz = se_bps_hz;
                            let first = task.first_attempt_s.expect("offloaded task attempted");
                            agent.offload_delay_sum_s += completes_at_s - first;
                            agent.offload_success_count += 1;
                        }
                    } else {
                        self.agents[i].service = Service::Transmit {
                            task,
                            channel,
                            completes_at_s,
                            se_bps_hz,
                        };
                    }
                }
            }
        }

        // Arrivals become available at the start of the next step.
        for i in 0..n {
            if self.agent_rngs[i].gen::<f64>() < self.config.task_arrival_prob {
                let kind = draw_kind(&mut self.agent_rngs[i]);
                if self.agents[i].queue.len() >= self.config.queue_max {
                    let deadline = kind.deadline_s();
                    self.agents[i].record_finish(false, None, deadline);
                    outcomes[i].task_finished = true;
                } else {
                    self.agents[i].queue.push_back(Task::new(kind, t1));
                }
            }
        }

        self.step_idx += 1;
        Ok(outcomes)
    }

    /// Assembles the reward inputs for one agent from current episode state.
    pub fn metric_sample(&self, agent: usize) -> Result<MetricSample, EnvError> {
        let a = self.agents.get(agent).ok_or(EnvError::UnknownAgent(agent))?;
        let k = self.config.num_channels;
        let successes: Vec<f64> = self.agents.iter().map(|ag| ag.mac_successes as f64).collect();
        let fairness_jain = reward::jain_index(&successes);
        let entropy_avg = self
            .agents
            .iter()
            .map(|ag| {
                reward::channel_entropy_from_counts(&ag.choice_counts(k), k)
                    .expect("k >= 2 validated")
                    .unwrap_or(0.0)
            })
            .sum::<f64>()
            / self.agents.len() as f64;
        let energy_total = a.energy_comp_total + a.energy_tx_total;
        let energy_eff = if energy_total > 0.0 && a.mb_delivered > 0.0 {
            a.mb_delivered / energy_total
        } else {
            0.0
        };
        Ok(MetricSample {
            latency_s: a.last_latency_s,
            deadline_s: a.last_deadline_s,
            energy_per_task: energy_total / a.tasks_succeeded.max(1) as f64,
            energy_cap: 1.0,
            energy_comp: a.energy_comp_total,
            energy_trans: a.energy_tx_total,
            energy_remaining: a.energy,
            energy_threshold: self.config.energy_threshold,
            fairness_jain,
            entropy_avg,
            reliability: {
                let window: Vec<bool> = a.reliability_window.iter().copied().collect();
                reward::reliability(&window).unwrap_or(0.0)
            },
            spectral: a.last_se_bps_hz,
            energy_eff,
            mac_rate: reward::mac_success_rate(a.mac_successes, a.mac_attempts)
                .expect("successes never exceed attempts")
                .unwrap_or(0.0),
        })
    }

    /// Deterministic textual dump of the world state, for reproducibility
    /// checks.
    pub fn dump(&self) -> String {
        format!(
            "step={:?} agents={:?} channels={:?}",
            self.step_idx, self.agents, self.channels
        )
    }
}

/// Uniform draw over the three task classes.
fn draw_kind(rng: &mut ChaCha12Rng) -> TaskKind {
    TASK_KINDS[rng.gen_range(0..TASK_KINDS.len())]
}

/// Random-walk mobility: jitter the heading, advance, clamp to the grid.
fn update_mobility(config: &EnvConfig, agent: &mut AgentSim, rng: &mut ChaCha12Rng) {
    agent.heading_rad = (agent.heading_rad
        + rng.gen_range(-HEADING_JITTER_RAD..=HEADING_JITTER_RAD))
    .rem_euclid(TAU);
    let dx = agent.heading_rad.cos() * agent.velocity_m_s * DT_S;
    let dy = agent.heading_rad.sin() * agent.velocity_m_s * DT_S;
    agent.position.0 = (agent.position.0 + dx).clamp(0.0, config.grid_size);
    agent.position.1 = (agent.position.1 + dy).clamp(0.0, config.grid_size);
}

/// Distance-based path loss with multiplicative Gaussian noise, floored at a
/// small positive constant.
fn refresh_gain(config: &EnvConfig, agent: &mut AgentSim, rng: &mut ChaCha12Rng) {
    let dx = agent.position.0 - config.server_pos.0;
    let dy = agent.position.1 - config.server_pos.1;
    let d = (dx * dx + dy * dy).sqrt();
    let ratio = d / GAIN_HALF_DIST_M;
    let base = 1.0 / (1.0 + ratio * ratio);
    let noise = if config.noise_std > 0.0 {
        Normal::new(0.0, config.noise_std)
            .expect("validated noise std")
            .sample(rng)
    } else {
        0.0
    };
    agent.gain = (base * (1.0 + noise)).max(GAIN_FLOOR);
}
