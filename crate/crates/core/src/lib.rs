//! FERMI-6G: federated multi-agent reinforcement learning for cross-layer
//! resource management in simulated 6G edge networks.
//!
//! The crate is organised around a deterministic simulation core:
//!
//! * [`env`] - the edge-network world model: agent mobility, task arrivals,
//!   local execution vs. offloading, channel access and energy accounting.
//! * [`reward`] - the multi-objective reward engine shared by training,
//!   evaluation and metrics logging.
//! * [`agent`] - recurrent Q-networks trained with truncated backpropagation
//!   through time, plus prioritized sequence replay.
//! * [`secure`] - pairwise-mask secure aggregation over quantized model
//!   updates, with a bit-exact wire format.
//! * [`baselines`] - non-learning and partially learning reference policies.
//! * [`fed`] - the training orchestrator: episode loop, periodic secure
//!   aggregation rounds, metrics logging and evaluation.
//!
//! Every source of randomness descends from a single master seed through
//! [`seeds`], so any run is reproducible bit-for-bit from its seed.

pub mod agent;
pub mod baselines;
pub mod env;
pub mod fed;
pub mod reward;
pub mod secure;
pub mod seeds;
