//! Pairwise-masking secure aggregation: Curve25519 key agreement, SHA-256
//! seed derivation, AES-CTR mask expansion over quantized updates, and a
//! synchronous all-or-nothing aggregation round.

pub mod mask;
pub mod quant;
pub mod round;

pub use mask::{
    derive_pair_seed, expand_mask, keygen, keypair_from_bytes, pair_seed_from_shared, KeyPair,
    MaskedUpdate, Participant,
    WireUpdate, WIRE_VERSION,
};
pub use quant::{dequantize, lift, quantize, QuantizedParams, SCALE, SCALE_BITS};
pub use round::Aggregator;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SecureError {
    #[error("non-finite parameter at index {index}")]
    NonFinite { index: usize },
    #[error("parameter {value} at index {index} exceeds the quantizer range")]
    OutOfRange { index: usize, value: f64 },
    #[error("mask dimension must be positive")]
    ZeroDim,
    #[error("no key for peer {id}")]
    MissingPeer { id: u16 },
    #[error("participant ids must be sorted and distinct")]
    UnsortedParticipants,
    #[error("decode: {0}")]
    Decode(String),
    #[error("a round is already active")]
    RoundActive,
    #[error("no active round")]
    NoActiveRound,
    #[error("empty participant set")]
    EmptyParticipants,
    #[error("duplicate participant id")]
    DuplicateParticipant,
    #[error("round poisoned: {0}")]
    Protocol(String),
    #[error("round aborted: {0}")]
    Aborted(String),
    #[error("round incomplete; missing {missing:?}")]
    Incomplete { missing: Vec<u16> },
}

/// Agents allowed into a federation round: those with residual energy
/// strictly above the threshold. Ordering follows the input.
pub fn eligibility_filter(energies: &[f64], threshold: f64) -> Vec<usize> {
    energies
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > threshold)
        .map(|(ix, _)| ix)
        .collect()
}
