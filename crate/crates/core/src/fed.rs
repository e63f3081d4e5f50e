//! Federated training orchestrator: episodic local TD learning across all
//! agents, secure aggregation on a fixed episode interval, per-episode
//! metrics, and greedy evaluation rollouts.

use crate::agent::{AgentError, DrqnAgent, NetDims, Network, ReplayBuffer, StoredSequence};
use crate::baselines;
use crate::env::{ActionVector, EdgeSim, EnvConfig, EnvError, DT_S, OBS_DIM};
use crate::reward::{self, MovingAverages, RewardError, RewardWeights};
use crate::secure::{
    self, eligibility_filter, Aggregator, Participant, SecureError, WireUpdate,
};
use crate::seeds;
use rand_chacha::ChaCha12Rng;
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

/// Factor applied to rewards before they enter replay and TD targets.
/// Reported metrics always carry the raw reward; the learner sees a scaled
/// copy so that early TD errors stay within reach of the fixed-step,
/// norm-clipped optimizer. Scaling the reward scales every Q-value by the
/// same factor and leaves the greedy policy unchanged.
const TD_REWARD_SCALE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Secure(#[from] SecureError),
    #[error("write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Which policy family drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Full three-head federated learner.
    Fermi6g,
    /// App-only learner with heuristic MAC/CPU, federated the same way.
    FedmarlBaseline,
    /// Uniform-random control; no learning, no aggregation.
    Random,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Fermi6g => "fermi6g",
            PolicyKind::FedmarlBaseline => "fedmarl_baseline",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fermi6g" => Ok(PolicyKind::Fermi6g),
            "fedmarl_baseline" => Ok(PolicyKind::FedmarlBaseline),
            "random" => Ok(PolicyKind::Random),
            other => Err(format!(
                "unknown policy '{other}' (expected fermi6g, fedmarl_baseline or random)"
            )),
        }
    }
}

/// Full run configuration: environment, reward weights, learner
/// hyperparameters and the federation schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub env: EnvConfig,
    pub reward: RewardWeights,
    pub policy: PolicyKind,
    pub episodes: u64,
    pub buffer: usize,
    pub batch: usize,
    pub gamma: f64,
    pub lr: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay: f64,
    pub sync_freq: u64,
    pub sequence_length: usize,
    pub clip_norm: f64,
    pub smoothing_window: usize,
    /// Federated aggregation interval in episodes.
    pub agg_interval: u64,
    pub reward_adaptation: bool,
    pub hidden_width: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            reward: RewardWeights::default(),
            policy: PolicyKind::Fermi6g,
            episodes: 800,
            buffer: 10_000,
            batch: 16,
            gamma: 0.99,
            lr: 1e-3,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay: 0.995,
            sync_freq: 10,
            sequence_length: 20,
            clip_norm: 1.0,
            smoothing_window: 10,
            agg_interval: 10,
            reward_adaptation: false,
            hidden_width: 32,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.env
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        self.reward
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        let positives = [
            ("buffer", self.buffer as f64),
            ("batch", self.batch as f64),
            ("lr", self.lr),
            ("eps_start", self.eps_start),
            ("eps_decay", self.eps_decay),
            ("sync_freq", self.sync_freq as f64),
            ("sequence_length", self.sequence_length as f64),
            ("clip_norm", self.clip_norm),
            ("smoothing_window", self.smoothing_window as f64),
            ("agg_interval", self.agg_interval as f64),
            ("hidden_width", self.hidden_width as f64),
        ];
        for (name, v) in positives {
            if !(v > 0.0) {
                return Err(TrainError::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(TrainError::Config("gamma must be in [0, 1)".into()));
        }
        if self.eps_end < 0.0 || self.eps_end > self.eps_start {
            return Err(TrainError::Config(
                "eps_end must be in [0, eps_start]".into(),
            ));
        }
        if self.eps_decay > 1.0 {
            return Err(TrainError::Config("eps_decay must be at most 1".into()));
        }
        if self.sequence_length > self.env.steps {
            return Err(TrainError::Config(
                "sequence_length cannot exceed steps per episode".into(),
            ));
        }
        Ok(())
    }
}

/// One logged training episode. Aggregates are over all agents; rate-style
/// fields fall back to 0 when an episode produced no samples for them.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: u64,
    pub mean_reward: f64,
    pub reliability: f64,
    pub latency_s: f64,
    pub completion_time_s: f64,
    pub energy_per_task: f64,
    pub energy_efficiency: f64,
    pub spectral_efficiency: f64,
    pub fairness_hybrid: f64,
    pub fairness_jain: f64,
    pub mac_success_rate: f64,
    pub failure_rate: f64,
    pub throughput_bps: f64,
    pub offloading_delay_s: f64,
    pub comm_bytes: u64,
    pub model_divergence: f64,
}

impl MetricsRow {
    /// CSV column order; `episode`, the thirteen metric columns, then the
    /// two federation bookkeeping columns.
    pub const COLUMNS: [&'static str; 16] = [
        "episode",
        "mean_reward",
        "reliability",
        "latency_s",
        "completion_time_s",
        "energy_per_task",
        "energy_efficiency",
        "spectral_efficiency",
        "fairness_hybrid",
        "fairness_jain",
        "mac_success_rate",
        "failure_rate",
        "throughput_bps",
        "offloading_delay_s",
        "comm_bytes",
        "model_divergence",
    ];

    /// The thirteen summary metrics (everything except the episode index
    /// and the federation bookkeeping columns), in column order.
    pub fn metric_values(&self) -> [(&'static str, f64); 13] {
        [
            ("mean_reward", self.mean_reward),
            ("reliability", self.reliability),
            ("latency_s", self.latency_s),
            ("completion_time_s", self.completion_time_s),
            ("energy_per_task", self.energy_per_task),
            ("energy_efficiency", self.energy_efficiency),
            ("spectral_efficiency", self.spectral_efficiency),
            ("fairness_hybrid", self.fairness_hybrid),
            ("fairness_jain", self.fairness_jain),
            ("mac_success_rate", self.mac_success_rate),
            ("failure_rate", self.failure_rate),
            ("throughput_bps", self.throughput_bps),
            ("offloading_delay_s", self.offloading_delay_s),
        ]
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.mean_reward,
            self.reliability,
            self.latency_s,
            self.completion_time_s,
            self.energy_per_task,
            self.energy_efficiency,
            self.spectral_efficiency,
            self.fairness_hybrid,
            self.fairness_jain,
            self.mac_success_rate,
            self.failure_rate,
            self.throughput_bps,
            self.offloading_delay_s,
            self.comm_bytes,
            self.model_divergence,
        )
    }
}

/// Renders the full log with a header row; the byte-exact reproducibility
/// surface of a run.
pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = MetricsRow::COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoundOutcome {
    /// New global broadcast to every agent.
    Broadcast,
    /// No eligible participants; previous global retained.
    Skipped,
    /// Protocol failure; agents keep their local parameters.
    Aborted(String),
}

/// Record of one federation attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundEvent {
    pub round: u32,
    pub episode: u64,
    pub participants: Vec<usize>,
    pub comm_bytes: u64,
    pub outcome: RoundOutcome,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOutput {
    pub rows: Vec<MetricsRow>,
    pub rounds: Vec<RoundEvent>,
    /// Episodes in which at least one learner update failed; the run
    /// continues past them.
    pub faulted_episodes: Vec<u64>,
}

/// Per-metric evaluation statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricStat {
    pub name: &'static str,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub rows: Vec<MetricsRow>,
    pub stats: Vec<MetricStat>,
}

enum Arm {
    Learned { agents: Vec<DrqnAgent>, app_only: bool },
    Random,
}

/// Orchestrates one run: owns the learners, the secure-aggregation
/// identities, the exploration schedule, and all derived RNG streams.
pub struct Trainer {
    cfg: TrainingConfig,
    dims: NetDims,
    arm: Arm,
    parts: Vec<Participant>,
    aggregator: Option<Aggregator>,
    global: Option<Vec<f64>>,
    weights: RewardWeights,
    epsilon: f64,
    episode: u64,
    next_round: u32,
    act_rngs: Vec<ChaCha12Rng>,
    learn_rngs: Vec<ChaCha12Rng>,
    last_energies: Vec<f64>,
    energy_overrides: BTreeMap<usize, f64>,
    adapt_window: VecDeque<(f64, f64, f64)>,
    checkpoint_dir: Option<PathBuf>,
}

struct EpisodeStats {
    reward_sum: f64,
    se_sum: f64,
    se_count: u64,
    bits_delivered: u64,
}

impl Trainer {
    pub fn new(cfg: TrainingConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let n = cfg.env.num_agents;
        let dims = NetDims::new(cfg.hidden_width, cfg.env.num_channels);
        let arm = match cfg.policy {
            PolicyKind::Random => Arm::Random,
            kind => {
                let mut agents = Vec::with_capacity(n);
                for i in 0..n {
                    let mut init_rng = seeds::derive_rng(cfg.seed, "agent-init", &[i as u64]);
                    let mut a = DrqnAgent::new(dims, cfg.buffer, cfg.sync_freq, &mut init_rng);
                    if kind == PolicyKind::FedmarlBaseline {
                        a.set_head_mask([true, false, false]);
                    }
                    agents.push(a);
                }
                Arm::Learned {
                    agents,
                    app_only: kind == PolicyKind::FedmarlBaseline,
                }
            }
        };
        let parts = (0..n)
            .map(|i| {
                let mut key_rng = seeds::derive_rng(cfg.seed, "agent-keys", &[i as u64]);
                (i as u16, secure::keygen(&mut key_rng))
            })
            .collect::<Vec<_>>();
        let directory: BTreeMap<u16, _> =
            parts.iter().map(|(id, kp)| (*id, kp.public())).collect();
        let parts = parts
            .into_iter()
            .map(|(id, kp)| Participant::new(id, kp, directory.clone()))
            .collect();
        let aggregator = match arm {
            Arm::Learned { .. } => Some(Aggregator::new(dims.param_count())?),
            Arm::Random => None,
        };
        let act_rngs = (0..n)
            .map(|i| seeds::derive_rng(cfg.seed, "agent-act", &[i as u64]))
            .collect();
        let learn_rngs = (0..n)
            .map(|i| seeds::derive_rng(cfg.seed, "agent-learn", &[i as u64]))
            .collect();
        Ok(Self {
            dims,
            arm,
            parts,
            aggregator,
            global: None,
            weights: cfg.reward.clone(),
            epsilon: cfg.eps_start,
            episode: 0,
            next_round: 1,
            act_rngs,
            learn_rngs,
            last_energies: vec![1.0; n],
            energy_overrides: BTreeMap::new(),
            adapt_window: VecDeque::new(),
            checkpoint_dir: None,
            cfg,
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.cfg
    }

    pub fn dims(&self) -> NetDims {
        self.dims
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.weights
    }

    pub fn global(&self) -> Option<&[f64]> {
        self.global.as_deref()
    }

    pub fn agent_params(&self, ix: usize) -> Option<&[f64]> {
        match &self.arm {
            Arm::Learned { agents, .. } => agents.get(ix).map(|a| a.net.params()),
            Arm::Random => None,
        }
    }

    pub fn agent_target_params(&self, ix: usize) -> Option<&[f64]> {
        match &self.arm {
            Arm::Learned { agents, .. } => agents.get(ix).map(|a| a.target.params()),
            Arm::Random => None,
        }
    }

    /// Transitions currently held in one agent's replay buffer.
    pub fn agent_replay_transitions(&self, ix: usize) -> Option<usize> {
        match &self.arm {
            Arm::Learned { agents, .. } => agents.get(ix).map(|a| a.replay.transitions()),
            Arm::Random => None,
        }
    }

    /// Pins an agent's reported end-of-episode energy, overriding whatever
    /// the simulator says. Harness seam for eligibility experiments.
    pub fn force_energy(&mut self, agent: usize, energy: f64) {
        self.energy_overrides.insert(agent, energy);
    }

    /// When set, every successful federation round writes the broadcast
    /// global model to `dir/global_round_NNNN.bin` in the agent checkpoint
    /// format. The directory must already exist.
    pub fn set_checkpoint_dir(&mut self, dir: Option<PathBuf>) {
        self.checkpoint_dir = dir;
    }

    fn write_global_checkpoint(&self, round: u32) -> Result<(), TrainError> {
        let Some(dir) = &self.checkpoint_dir else {
            return Ok(());
        };
        let global = self.global.as_ref().expect("broadcast stored a global");
        let net = Network::from_params(self.dims, global.clone()).expect("dims match");
        let path = dir.join(format!("global_round_{round:04}.bin"));
        std::fs::write(&path, net.to_bytes()).map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn beta(&self) -> f64 {
        let denom = self.cfg.episodes.saturating_sub(1).max(1) as f64;
        ReplayBuffer::beta_at(self.episode as f64 / denom)
    }

    /// Plays one training episode on a fresh simulator instance, then runs
    /// a federation round if the schedule says so, and returns the episode's
    /// metrics row. Step order per agent: observe, advance the recurrent
    /// state, act, then after the joint simulator step store the transition
    /// and take one learner update.
    pub fn run_episode(&mut self, output: &mut TrainOutput) -> Result<MetricsRow, TrainError> {
        let n = self.cfg.env.num_agents;
        let steps = self.cfg.env.steps;
        let env_seed = seeds::derive_u64(self.cfg.seed, "env-episode", &[self.episode]);
        let mut env = EdgeSim::new(&self.cfg.env, env_seed)?;
        if let Arm::Learned { agents, .. } = &mut self.arm {
            for a in agents.iter_mut() {
                a.reset_hidden();
            }
        }

        let mut obs_flat: Vec<Vec<f64>> = vec![Vec::with_capacity((steps + 1) * OBS_DIM); n];
        let mut acts: Vec<Vec<ActionVector>> = vec![Vec::with_capacity(steps); n];
        let mut rewards: Vec<Vec<f64>> = vec![Vec::with_capacity(steps); n];
        let mut delay_sum = vec![0.0f64; n];
        let mut denials = vec![0u64; n];
        let mut stats = EpisodeStats {
            reward_sum: 0.0,
            se_sum: 0.0,
            se_count: 0,
            bits_delivered: 0,
        };
        let mut faulted = false;
        let beta = self.beta();

        for _ in 0..steps {
            let loads = env.channel_loads();
            let mut actions = Vec::with_capacity(n);
            for i in 0..n {
                let features = env.observe(i)?.features();
                let action = match &mut self.arm {
                    Arm::Random => {
                        baselines::random_policy(self.cfg.env.num_channels, &mut self.act_rngs[i])
                    }
                    Arm::Learned { agents, app_only } => {
                        if *app_only {
                            let q = agents[i].q_step(&features)?;
                            baselines::app_only_action(
                                &q,
                                self.epsilon,
                                &loads,
                                &mut self.act_rngs[i],
                            )
                        } else {
                            agents[i].act_with(&features, self.epsilon, &mut self.act_rngs[i])?
                        }
                    }
                };
                obs_flat[i].extend_from_slice(&features);
                actions.push(action);
            }
            let outcomes = env.step(&actions)?;
            for i in 0..n {
                let sample = env.metric_sample(i)?;
                let r = reward::total_reward(&sample, &self.weights)?.total;
                stats.reward_sum += r;
                rewards[i].push(r * TD_REWARD_SCALE);
                acts[i].push(actions[i]);
                delay_sum[i] += (sample.latency_s / sample.deadline_s).clamp(0.0, 2.0) / 2.0;
                if outcomes[i].mac_attempted && !outcomes[i].mac_succeeded {
                    denials[i] += 1;
                }
                if outcomes[i].se_bps_hz > 0.0 {
                    stats.se_sum += outcomes[i].se_bps_hz;
                    stats.se_count += 1;
                }
                stats.bits_delivered += outcomes[i].bits_delivered;
            }
            if let Arm::Learned { agents, .. } = &mut self.arm {
                for (i, a) in agents.iter_mut().enumerate() {
                    let learned = a.learn(
                        self.cfg.batch,
                        self.cfg.gamma,
                        self.cfg.lr,
                        self.cfg.clip_norm,
                        beta,
                        &mut self.learn_rngs[i],
                    );
                    if learned.is_err() {
                        faulted = true;
                    }
                }
            }
        }

        // Final next-observations close the stored sequences.
        for (i, flat) in obs_flat.iter_mut().enumerate() {
            flat.extend_from_slice(&env.observe(i)?.features());
        }
        if let Arm::Learned { agents, .. } = &mut self.arm {
            let seq_len = self.cfg.sequence_length;
            for i in 0..n {
                let delay_norm = delay_sum[i] / steps as f64;
                let interference = denials[i] as f64 / steps as f64;
                for start in (0..steps).step_by(seq_len) {
                    let end = (start + seq_len).min(steps);
                    let mut dones = vec![false; end - start];
                    if end == steps {
                        *dones.last_mut().expect("non-empty chunk") = true;
                    }
                    let seq = StoredSequence {
                        obs_ext: obs_flat[i][start * OBS_DIM..(end + 1) * OBS_DIM].to_vec(),
                        actions: acts[i][start..end].to_vec(),
                        rewards: rewards[i][start..end].to_vec(),
                        dones,
                        delay_norm,
                        interference,
                    };
                    agents[i].store(seq)?;
                }
            }
        }

        self.last_energies = (0..n)
            .map(|i| {
                self.energy_overrides
                    .get(&i)
                    .copied()
                    .unwrap_or_else(|| env.agents()[i].energy)
            })
            .collect();

        self.episode += 1;
        self.epsilon = (self.epsilon * self.cfg.eps_decay).max(self.cfg.eps_end);

        let mut comm_bytes = 0u64;
        if matches!(self.arm, Arm::Learned { .. }) && self.episode % self.cfg.agg_interval == 0 {
            let event = self.federated_round();
            comm_bytes = event.comm_bytes;
            let broadcast = matches!(event.outcome, RoundOutcome::Broadcast)
                .then_some(event.round);
            output.rounds.push(event);
            if let Some(round) = broadcast {
                self.write_global_checkpoint(round)?;
            }
        }

        let row = self.assemble_row(&env, &stats, comm_bytes);
        if self.cfg.reward_adaptation {
            self.adapt_weights(&row, &env);
        }
        if faulted {
            output.faulted_episodes.push(row.episode);
        }
        Ok(row)
    }

    fn assemble_row(&self, env: &EdgeSim, stats: &EpisodeStats, comm_bytes: u64) -> MetricsRow {
        let n = self.cfg.env.num_agents;
        let steps = self.cfg.env.steps;
        let agents = env.agents();
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };

        let finished: u64 = agents.iter().map(|a| a.tasks_finished).sum();
        let succeeded: u64 = agents.iter().map(|a| a.tasks_succeeded).sum();
        let latency_sum: f64 = agents.iter().map(|a| a.latency_sum_s).sum();
        let latency_count: u64 = agents.iter().map(|a| a.latency_count).sum();
        let completion_sum: f64 = agents.iter().map(|a| a.completion_sum_s).sum();
        let energy_total: f64 = agents
            .iter()
            .map(|a| a.energy_comp_total + a.energy_tx_total)
            .sum();
        let mb: f64 = agents.iter().map(|a| a.mb_delivered).sum();
        let mac_attempts: u64 = agents.iter().map(|a| a.mac_attempts).sum();
        let mac_successes: u64 = agents.iter().map(|a| a.mac_successes).sum();
        let offload_sum: f64 = agents.iter().map(|a| a.offload_delay_sum_s).sum();
        let offload_count: u64 = agents.iter().map(|a| a.offload_success_count).sum();

        let shares: Vec<f64> = agents.iter().map(|a| a.mac_successes as f64).collect();
        let fairness_jain = reward::jain_index(&shares);
        let k = self.cfg.env.num_channels;
        let entropy_avg = agents
            .iter()
            .map(|a| {
                reward::channel_entropy_from_counts(&a.choice_counts(k), k)
                    .expect("k >= 2 validated")
                    .unwrap_or(0.0)
            })
            .sum::<f64>()
            / n as f64;
        let fairness_hybrid =
            self.weights.beta_jain * fairness_jain + self.weights.beta_entropy * entropy_avg;

        let divergence = match (&self.arm, &self.global) {
            (Arm::Learned { agents, .. }, Some(g)) => {
                agents
                    .iter()
                    .map(|a| {
                        a.net
                            .params()
                            .iter()
                            .zip(g)
                            .map(|(p, gp)| (p - gp) * (p - gp))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .sum::<f64>()
                    / n as f64
            }
            _ => 0.0,
        };

        MetricsRow {
            episode: self.episode.saturating_sub(1),
            mean_reward: stats.reward_sum / (n * steps) as f64,
            reliability: ratio(succeeded as f64, finished as f64),
            latency_s: ratio(latency_sum, latency_count as f64),
            completion_time_s: ratio(completion_sum, succeeded as f64),
            energy_per_task: ratio(energy_total, succeeded as f64),
            energy_efficiency: ratio(mb, energy_total),
            spectral_efficiency: ratio(stats.se_sum, stats.se_count as f64),
            fairness_hybrid,
            fairness_jain,
            mac_success_rate: ratio(mac_successes as f64, mac_attempts as f64),
            failure_rate: ratio((finished - succeeded) as f64, finished as f64),
            throughput_bps: stats.bits_delivered as f64 / (steps as f64 * DT_S),
            offloading_delay_s: ratio(offload_sum, offload_count as f64),
            comm_bytes,
            model_divergence: divergence,
        }
    }

    fn adapt_weights(&mut self, row: &MetricsRow, env: &EdgeSim) {
        let mean_energy =
            env.agents().iter().map(|a| a.energy).sum::<f64>() / env.agents().len() as f64;
        self.adapt_window
            .push_back((row.latency_s, mean_energy, row.fairness_hybrid));
        while self.adapt_window.len() > self.cfg.smoothing_window {
            self.adapt_window.pop_front();
        }
        let len = self.adapt_window.len() as f64;
        let (lat, en, fair) = self
            .adapt_window
            .iter()
            .fold((0.0, 0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1, acc.2 + v.2));
        let avgs = MovingAverages {
            latency_s: lat / len,
            energy_remaining: en / len,
            energy_threshold: self.cfg.env.energy_threshold,
            fairness: fair / len,
        };
        self.weights = reward::adapt_weights(&self.weights, &avgs, true);
    }

    /// One federation attempt against the current agent parameters and the
    /// most recent end-of-episode energies: eligibility filter, quantize,
    /// mask, aggregate, then broadcast the new global model to every agent
    /// (eligible or not). Failures leave every agent untouched.
    pub fn federated_round(&mut self) -> RoundEvent {
        let round = self.next_round;
        self.next_round += 1;
        let episode = self.episode;
        let eligible = eligibility_filter(&self.last_energies, self.cfg.env.energy_threshold);
        let mut event = RoundEvent {
            round,
            episode,
            participants: eligible.clone(),
            comm_bytes: 0,
            outcome: RoundOutcome::Skipped,
        };
        if eligible.is_empty() {
            return event;
        }
        let (agents, _) = match &mut self.arm {
            Arm::Learned { agents, app_only } => (agents, *app_only),
            Arm::Random => {
                event.outcome = RoundOutcome::Aborted("no learners in this policy".into());
                return event;
            }
        };
        let aggregator = self.aggregator.as_mut().expect("learned arm has aggregator");
        let ids: Vec<u16> = eligible.iter().map(|&i| i as u16).collect();
        let mut attempt = || -> Result<Vec<f64>, SecureError> {
            aggregator.begin_round(round, &ids)?;
            for &i in &eligible {
                let q = secure::quantize(agents[i].net.params())?;
                let masked = self.parts[i].mask_update(&q, round, &ids)?;
                let bytes = WireUpdate::new(round, ids.clone(), masked.values)?.encode();
                event.comm_bytes += bytes.len() as u64;
                aggregator.submit(i as u16, &bytes)?;
            }
            aggregator.finalize()
        };
        match attempt() {
            Ok(global) => {
                for a in agents.iter_mut() {
                    a.adopt_global(&global).expect("dims match");
                }
                event.comm_bytes += (self.cfg.env.num_agents * global.len() * 8) as u64;
                self.global = Some(global);
                event.outcome = RoundOutcome::Broadcast;
            }
            Err(e) => {
                aggregator.abort();
                event.outcome = RoundOutcome::Aborted(e.to_string());
            }
        }
        event
    }

    /// Runs the configured number of episodes from the current state.
    pub fn train(&mut self) -> Result<TrainOutput, TrainError> {
        let mut output = TrainOutput::default();
        while self.episode < self.cfg.episodes {
            let row = self.run_episode(&mut output)?;
            output.rows.push(row);
        }
        Ok(output)
    }

    /// Greedy rollouts on fresh evaluation environments: no exploration, no
    /// learning, no aggregation. Returns per-episode rows plus mean and
    /// population standard deviation for the thirteen metric columns.
    pub fn evaluate(&mut self, episodes: u64, eval_seed: u64) -> Result<EvalSummary, TrainError> {
        let n = self.cfg.env.num_agents;
        let steps = self.cfg.env.steps;
        let mut eval_rngs: Vec<ChaCha12Rng> = (0..n)
            .map(|i| seeds::derive_rng(eval_seed, "eval-act", &[i as u64]))
            .collect();
        let mut rows = Vec::with_capacity(episodes as usize);
        for ep in 0..episodes {
            let env_seed = seeds::derive_u64(eval_seed, "eval-env", &[ep]);
            let mut env = EdgeSim::new(&self.cfg.env, env_seed)?;
            if let Arm::Learned { agents, .. } = &mut self.arm {
                for a in agents.iter_mut() {
                    a.reset_hidden();
                }
            }
            let mut stats = EpisodeStats {
                reward_sum: 0.0,
                se_sum: 0.0,
                se_count: 0,
                bits_delivered: 0,
            };
            for _ in 0..steps {
                let loads = env.channel_loads();
                let mut actions = Vec::with_capacity(n);
                for i in 0..n {
                    let features = env.observe(i)?.features();
                    let action = match &mut self.arm {
                        Arm::Random => baselines::random_policy(
                            self.cfg.env.num_channels,
                            &mut eval_rngs[i],
                        ),
                        Arm::Learned { agents, app_only } => {
                            if *app_only {
                                let q = agents[i].q_step(&features)?;
                                baselines::app_only_action(&q, 0.0, &loads, &mut eval_rngs[i])
                            } else {
                                agents[i].act_with(&features, 0.0, &mut eval_rngs[i])?
                            }
                        }
                    };
                    actions.push(action);
                }
                let outcomes = env.step(&actions)?;
                for i in 0..n {
                    let sample = env.metric_sample(i)?;
                    stats.reward_sum += reward::total_reward(&sample, &self.weights)?.total;
                    if outcomes[i].se_bps_hz > 0.0 {
                        stats.se_sum += outcomes[i].se_bps_hz;
                        stats.se_count += 1;
                    }
                    stats.bits_delivered += outcomes[i].bits_delivered;
                }
            }
            let mut row = self.assemble_row(&env, &stats, 0);
            row.episode = ep;
            row.model_divergence = 0.0;
            rows.push(row);
        }
        let stats = summarize(&rows);
        Ok(EvalSummary { rows, stats })
    }
}

/// Mean and population standard deviation of the thirteen metric columns.
pub fn summarize(rows: &[MetricsRow]) -> Vec<MetricStat> {
    if rows.is_empty() {
        return Vec::new();
    }
    let names: Vec<&'static str> = rows[0].metric_values().iter().map(|(n, _)| *n).collect();
    let count = rows.len() as f64;
    names
        .iter()
        .enumerate()
        .map(|(col, &name)| {
            let vals: Vec<f64> = rows.iter().map(|r| r.metric_values()[col].1).collect();
            let mean = vals.iter().sum::<f64>() / count;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
            MetricStat {
                name,
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}
