//! Environment configuration.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
}

/// World-model parameters.
///
/// Defaults describe the reference scenario: five agents on a 100 m x 100 m
/// grid with the edge server at the center, three shared channels of capacity
/// two, 20-step episodes at one simulated second per step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub num_agents: usize,
    pub num_channels: usize,
    pub steps: usize,
    pub grid_size: f64,
    pub server_pos: (f64, f64),
    /// Probability a denied offload attempt is retried instead of failed.
    pub retry_prob: f64,
    /// Standard deviation of the multiplicative channel-gain noise.
    pub noise_std: f64,
    /// Airtime of one granted transmission, seconds.
    pub tx_delay_s: f64,
    /// Battery fraction below which an agent is penalized and excluded from
    /// aggregation.
    pub energy_threshold: f64,
    pub queue_max: usize,
    /// Per-step probability that a new task arrives at an agent.
    pub task_arrival_prob: f64,
    /// Concurrent transmissions a channel can carry.
    pub channel_capacity: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_agents: 5,
            num_channels: 3,
            steps: 20,
            grid_size: 100.0,
            server_pos: (50.0, 50.0),
            retry_prob: 0.3,
            noise_std: 0.05,
            tx_delay_s: 2.0,
            energy_threshold: 0.2,
            queue_max: 10,
            task_arrival_prob: 0.5,
            channel_capacity: 2,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: String| Err(ConfigError::Invalid(msg));
        if self.num_agents == 0 {
            return err("NUM_AGENTS must be at least 1".into());
        }
        if self.num_channels < 2 {
            return err("NUM_CHANNELS must be at least 2".into());
        }
        if self.steps == 0 {
            return err("STEPS must be at least 1".into());
        }
        if !(self.grid_size > 0.0) {
            return err(format!("GRID_SIZE must be positive, got {}", self.grid_size));
        }
        let (sx, sy) = self.server_pos;
        if !(0.0..=self.grid_size).contains(&sx) || !(0.0..=self.grid_size).contains(&sy) {
            return err(format!("SERVER_POS ({sx}, {sy}) outside the grid"));
        }
        if !(0.0..=1.0).contains(&self.retry_prob) {
            return err(format!("RETRY_PROB must be in [0,1], got {}", self.retry_prob));
        }
        if !(self.noise_std >= 0.0) {
            return err(format!("NOISE_STD must be nonnegative, got {}", self.noise_std));
        }
        if !(self.tx_delay_s > 0.0) {
            return err(format!("TX_DELAY_S must be positive, got {}", self.tx_delay_s));
        }
        if !(0.0..=1.0).contains(&self.energy_threshold) {
            return err(format!(
                "ENERGY_THRESHOLD must be in [0,1], got {}",
                self.energy_threshold
            ));
        }
        if self.queue_max == 0 {
            return err("QUEUE_MAX must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.task_arrival_prob) {
            return err(format!(
                "TASK_ARRIVAL_PROB must be in [0,1], got {}",
                self.task_arrival_prob
            ));
        }
        if self.channel_capacity == 0 {
            return err("CHANNEL_CAPACITY must be at least 1".into());
        }
        Ok(())
    }
}
