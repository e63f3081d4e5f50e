//! Pairwise masking primitives: Curve25519 key agreement, per-round seed
//! derivation, deterministic mask expansion, and the signed mask sum that
//! cancels across a participant set.

use super::quant::QuantizedParams;
use super::SecureError;
use aes::cipher::{KeyIvInit, StreamCipher};
use aes::Aes128;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use x25519_dalek::{PublicKey, StaticSecret};

type MaskStream = ctr::Ctr128BE<Aes128>;

pub const WIRE_VERSION: u8 = 1;

/// Curve25519 key pair for one agent. The secret stays in process memory
/// and never enters any transcript.
#[derive(Clone)]
pub struct KeyPair {
    secret: StaticSecret,
    public: PublicKey,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public.as_bytes())
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn shared_secret(&self, their_public: &PublicKey) -> [u8; 32] {
        *self.secret.diffie_hellman(their_public).as_bytes()
    }
}

/// Generates a key pair from the provided (deterministically seeded) rng.
pub fn keygen(rng: &mut ChaCha12Rng) -> KeyPair {
    let secret = StaticSecret::random_from_rng(rng);
    let public = PublicKey::from(&secret);
    KeyPair { secret, public }
}

pub fn keypair_from_bytes(secret: [u8; 32]) -> KeyPair {
    let secret = StaticSecret::from(secret);
    let public = PublicKey::from(&secret);
    KeyPair { secret, public }
}

/// Pairwise round seed: SHA-256 over shared secret, round (u32 LE), then
/// the two agent ids in ascending order (u16 LE each). Both endpoints of a
/// pair derive the identical seed.
pub fn derive_pair_seed(
    keys: &KeyPair,
    their_public: &PublicKey,
    round: u32,
    my_id: u16,
    their_id: u16,
) -> [u8; 32] {
    pair_seed_from_shared(&keys.shared_secret(their_public), round, my_id, their_id)
}

/// [`derive_pair_seed`] with the Diffie-Hellman output already in hand.
pub fn pair_seed_from_shared(shared: &[u8; 32], round: u32, my_id: u16, their_id: u16) -> [u8; 32] {
    let (lo, hi) = if my_id <= their_id {
        (my_id, their_id)
    } else {
        (their_id, my_id)
    };
    let mut h = Sha256::new();
    h.update(shared);
    h.update(round.to_le_bytes());
    h.update(lo.to_le_bytes());
    h.update(hi.to_le_bytes());
    h.finalize().into()
}

/// Expands a seed into `dim` ring elements: AES-128-CTR keyed by the first
/// 16 seed bytes, zero nonce, counter from 0; the keystream is read as
/// little-endian u32 words.
pub fn expand_mask(seed: &[u8; 32], dim: usize) -> Result<Vec<u32>, SecureError> {
    if dim == 0 {
        return Err(SecureError::ZeroDim);
    }
    let mut key = [0u8; 16];
    key.copy_from_slice(&seed[..16]);
    let mut cipher = MaskStream::new(&key.into(), &[0u8; 16].into());
    let mut buf = vec![0u8; dim * 4];
    cipher.apply_keystream(&mut buf);
    Ok(buf
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// A masked integer update for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedUpdate {
    pub agent_id: u16,
    pub round: u32,
    pub values: Vec<u32>,
}

/// One agent's view of the protocol: its identity, key pair, and the
/// Diffie-Hellman secret shared with every other agent in the directory.
/// Secrets are computed once at construction; per-round masking only hashes.
#[derive(Clone)]
pub struct Participant {
    id: u16,
    keys: KeyPair,
    shared: BTreeMap<u16, [u8; 32]>,
}

impl std::fmt::Debug for Participant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Participant")
            .field("id", &self.id)
            .field("keys", &self.keys)
            .field("peers", &self.shared.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Participant {
    pub fn new(id: u16, keys: KeyPair, directory: BTreeMap<u16, PublicKey>) -> Self {
        let shared = directory
            .iter()
            .filter(|(peer, _)| **peer != id)
            .map(|(peer, public)| (*peer, keys.shared_secret(public)))
            .collect();
        Self { id, keys, shared }
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn public(&self) -> PublicKey {
        self.keys.public()
    }

    /// Applies the total pairwise mask for this round's participant set:
    /// add the pair stream when the peer id is larger, subtract it when
    /// smaller, so that summing all participants' updates cancels every
    /// mask exactly.
    pub fn mask_update(
        &self,
        w: &QuantizedParams,
        round: u32,
        participants: &[u16],
    ) -> Result<MaskedUpdate, SecureError> {
        let mut values = w.values.clone();
        for &peer in participants {
            if peer == self.id {
                continue;
            }
            let shared = self
                .shared
                .get(&peer)
                .ok_or(SecureError::MissingPeer { id: peer })?;
            let seed = pair_seed_from_shared(shared, round, self.id, peer);
            let stream = expand_mask(&seed, w.dim())?;
            if peer > self.id {
                for (v, m) in values.iter_mut().zip(&stream) {
                    *v = v.wrapping_add(*m);
                }
            } else {
                for (v, m) in values.iter_mut().zip(&stream) {
                    *v = v.wrapping_sub(*m);
                }
            }
        }
        Ok(MaskedUpdate {
            agent_id: self.id,
            round,
            values,
        })
    }
}

/// Round message as transmitted: header (version, round u32 LE, dim u32 LE,
/// participant count u16 LE, sorted participant ids u16 LE) followed by the
/// masked vector as u32 LE words. Sender identity rides on the transport.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireUpdate {
    pub round: u32,
    pub participants: Vec<u16>,
    pub values: Vec<u32>,
}

impl WireUpdate {
    pub fn new(round: u32, participants: Vec<u16>, values: Vec<u32>) -> Result<Self, SecureError> {
        if !participants.windows(2).all(|w| w[0] < w[1]) {
            return Err(SecureError::UnsortedParticipants);
        }
        Ok(Self {
            round,
            participants,
            values,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(1 + 4 + 4 + 2 + self.participants.len() * 2 + self.values.len() * 4);
        out.push(WIRE_VERSION);
        out.extend(self.round.to_le_bytes());
        out.extend((self.values.len() as u32).to_le_bytes());
        out.extend((self.participants.len() as u16).to_le_bytes());
        for id in &self.participants {
            out.extend(id.to_le_bytes());
        }
        for v in &self.values {
            out.extend(v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SecureError> {
        let fail = |what: &str| SecureError::Decode(format!("truncated reading {what}"));
        let mut at = 0usize;
        let take = |at: &mut usize, n: usize| -> Option<&[u8]> {
            let s = bytes.get(*at..*at + n)?;
            *at += n;
            Some(s)
        };
        let version = take(&mut at, 1).ok_or_else(|| fail("version"))?[0];
        if version != WIRE_VERSION {
            return Err(SecureError::Decode(format!("unsupported version {version}")));
        }
        let round = u32::from_le_bytes(
            take(&mut at, 4).ok_or_else(|| fail("round"))?.try_into().unwrap(),
        );
        let dim = u32::from_le_bytes(
            take(&mut at, 4).ok_or_else(|| fail("dim"))?.try_into().unwrap(),
        ) as usize;
        let count = u16::from_le_bytes(
            take(&mut at, 2).ok_or_else(|| fail("count"))?.try_into().unwrap(),
        ) as usize;
        let mut participants = Vec::with_capacity(count);
        for _ in 0..count {
            participants.push(u16::from_le_bytes(
                take(&mut at, 2).ok_or_else(|| fail("ids"))?.try_into().unwrap(),
            ));
        }
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(u32::from_le_bytes(
                take(&mut at, 4).ok_or_else(|| fail("values"))?.try_into().unwrap(),
            ));
        }
        if at != bytes.len() {
            return Err(SecureError::Decode(format!(
                "{} trailing bytes",
                bytes.len() - at
            )));
        }
        Self::new(round, participants, values)
    }
}
