//! Synchronous aggregation rounds. The aggregator commits to a participant
//! set, collects exactly that set's masked submissions, and releases the
//! dequantized average only when the set is complete; any deviation aborts
//! the round with no partial output.

use super::mask::WireUpdate;
use super::quant::{lift, SCALE};
use super::SecureError;
use std::collections::BTreeMap;

#[derive(Debug)]
struct RoundState {
    round: u32,
    expected: Vec<u16>,
    received: BTreeMap<u16, Vec<u32>>,
    aborted: Option<String>,
}

/// Single-owner round driver; all submissions are serialized through it.
#[derive(Debug)]
pub struct Aggregator {
    dim: usize,
    state: Option<RoundState>,
}

impl Aggregator {
    pub fn new(dim: usize) -> Result<Self, SecureError> {
        if dim == 0 {
            return Err(SecureError::ZeroDim);
        }
        Ok(Self { dim, state: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Commits the participant set for a round. The set is fixed from here
    /// on; submissions are checked against it.
    pub fn begin_round(&mut self, round: u32, participants: &[u16]) -> Result<(), SecureError> {
        if self.state.is_some() {
            return Err(SecureError::RoundActive);
        }
        if participants.is_empty() {
            return Err(SecureError::EmptyParticipants);
        }
        let mut expected = participants.to_vec();
        expected.sort_unstable();
        if expected.windows(2).any(|w| w[0] == w[1]) {
            return Err(SecureError::DuplicateParticipant);
        }
        self.state = Some(RoundState {
            round,
            expected,
            received: BTreeMap::new(),
            aborted: None,
        });
        Ok(())
    }

    pub fn expected(&self) -> Option<&[u16]> {
        self.state.as_ref().map(|s| s.expected.as_slice())
    }

    pub fn missing(&self) -> Vec<u16> {
        match &self.state {
            Some(s) => s
                .expected
                .iter()
                .copied()
                .filter(|id| !s.received.contains_key(id))
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.state
            .as_ref()
            .map(|s| s.aborted.is_none() && s.received.len() == s.expected.len())
            .unwrap_or(false)
    }

    fn poison(state: &mut RoundState, reason: String) -> SecureError {
        state.aborted = Some(reason.clone());
        SecureError::Protocol(reason)
    }

    /// Accepts one wire message from `from`. Any inconsistency with the
    /// committed round (wrong round number, set, dimension, an uncommitted
    /// sender, or a duplicate) poisons the round so it can never finalize.
    pub fn submit(&mut self, from: u16, bytes: &[u8]) -> Result<(), SecureError> {
        let dim = self.dim;
        let state = self.state.as_mut().ok_or(SecureError::NoActiveRound)?;
        if let Some(reason) = &state.aborted {
            return Err(SecureError::Aborted(reason.clone()));
        }
        let wire = match WireUpdate::decode(bytes) {
            Ok(w) => w,
            Err(e) => return Err(Self::poison(state, format!("bad message from {from}: {e}"))),
        };
        if wire.round != state.round {
            return Err(Self::poison(
                state,
                format!("round {} from {from}, expected {}", wire.round, state.round),
            ));
        }
        if wire.participants != state.expected {
            return Err(Self::poison(
                state,
                format!("participant set mismatch from {from}"),
            ));
        }
        if wire.values.len() != dim {
            return Err(Self::poison(
                state,
                format!("dim {} from {from}, expected {dim}", wire.values.len()),
            ));
        }
        if !state.expected.contains(&from) {
            return Err(Self::poison(state, format!("uncommitted sender {from}")));
        }
        if state.received.contains_key(&from) {
            return Err(Self::poison(state, format!("duplicate sender {from}")));
        }
        state.received.insert(from, wire.values);
        Ok(())
    }

    /// Releases the averaged model once every committed participant has
    /// submitted: wrapping integer sum (masks cancel), centered lift,
    /// divide by the set size, rescale to floats. Clears the round.
    pub fn finalize(&mut self) -> Result<Vec<f64>, SecureError> {
        let state = self.state.as_ref().ok_or(SecureError::NoActiveRound)?;
        if let Some(reason) = &state.aborted {
            return Err(SecureError::Aborted(reason.clone()));
        }
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(SecureError::Incomplete { missing });
        }
        let state = self.state.take().expect("checked above");
        let n = state.expected.len() as f64;
        let mut acc = vec![0u32; self.dim];
        for values in state.received.values() {
            for (a, v) in acc.iter_mut().zip(values) {
                *a = a.wrapping_add(*v);
            }
        }
        Ok(acc
            .into_iter()
            .map(|v| lift(v) as f64 / n / SCALE)
            .collect())
    }

    /// Drops the current round without output.
    pub fn abort(&mut self) {
        self.state = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::secure::mask::{keygen, MaskedUpdate, Participant};
    use crate::secure::quant::{quantize, QuantizedParams};
    use crate::seeds;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn group(n: u16, label: &str) -> Vec<Participant> {
        let mut rng = seeds::derive_rng(0xA66, label, &[]);
        let keys: Vec<_> = (0..n).map(|_| keygen(&mut rng)).collect();
        let directory: BTreeMap<u16, _> =
            (0..n).map(|i| (i, keys[i as usize].public())).collect();
        keys.into_iter()
            .enumerate()
            .map(|(i, k)| Participant::new(i as u16, k, directory.clone()))
            .collect()
    }

    fn wire(update: &MaskedUpdate, participants: &[u16]) -> Vec<u8> {
        WireUpdate::new(update.round, participants.to_vec(), update.values.clone())
            .unwrap()
            .encode()
    }

    #[test]
    fn identical_submissions_average_to_themselves() {
        let ps = group(4, "idempotent");
        let ids: Vec<u16> = (0..4).collect();
        let p = [0.5, -0.25, 2.0, 0.0];
        let q = quantize(&p).unwrap();
        let mut agg = Aggregator::new(4).unwrap();
        agg.begin_round(0, &ids).unwrap();
        for part in &ps {
            let m = part.mask_update(&q, 0, &ids).unwrap();
            agg.submit(part.id(), &wire(&m, &ids)).unwrap();
        }
        assert_eq!(agg.finalize().unwrap(), p.to_vec());
    }

    #[test]
    fn masked_average_matches_direct_float_average() {
        let ps = group(3, "avg");
        let ids: Vec<u16> = (0..3).collect();
        let mut rng = seeds::derive_rng(0xA66, "avg-data", &[]);
        let dim = 257;
        let inputs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut agg = Aggregator::new(dim).unwrap();
        agg.begin_round(9, &ids).unwrap();
        for (part, x) in ps.iter().zip(&inputs) {
            let m = part.mask_update(&quantize(x).unwrap(), 9, &ids).unwrap();
            agg.submit(part.id(), &wire(&m, &ids)).unwrap();
        }
        let got = agg.finalize().unwrap();
        let bound = 3.0 / SCALE;
        for v in 0..dim {
            let direct = inputs.iter().map(|x| x[v]).sum::<f64>() / 3.0;
            assert!(
                (got[v] - direct).abs() < bound,
                "coord {v}: {} vs {direct}",
                got[v]
            );
        }
    }

    #[test]
    fn masking_never_changes_the_integer_aggregate() {
        let ps = group(4, "exact");
        let ids: Vec<u16> = (0..4).collect();
        let mut rng = seeds::derive_rng(0xA66, "exact-data", &[]);
        let dim = 63;
        let quantized: Vec<QuantizedParams> = (0..4)
            .map(|_| QuantizedParams {
                values: (0..dim).map(|_| rng.gen::<u32>()).collect(),
            })
            .collect();
        let mut masked_sum = vec![0u32; dim];
        let mut plain_sum = vec![0u32; dim];
        for (part, q) in ps.iter().zip(&quantized) {
            let m = part.mask_update(q, 4, &ids).unwrap();
            for v in 0..dim {
                masked_sum[v] = masked_sum[v].wrapping_add(m.values[v]);
                plain_sum[v] = plain_sum[v].wrapping_add(q.values[v]);
            }
        }
        assert_eq!(masked_sum, plain_sum);
    }

    #[test]
    fn withheld_submission_yields_no_output() {
        let ps = group(3, "withheld");
        let ids: Vec<u16> = (0..3).collect();
        let q = quantize(&[1.0]).unwrap();
        let mut agg = Aggregator::new(1).unwrap();
        agg.begin_round(2, &ids).unwrap();
        for part in &ps[..2] {
            let m = part.mask_update(&q, 2, &ids).unwrap();
            agg.submit(part.id(), &wire(&m, &ids)).unwrap();
        }
        assert!(!agg.is_complete());
        assert_eq!(agg.missing(), vec![2]);
        assert!(matches!(
            agg.finalize(),
            Err(SecureError::Incomplete { .. })
        ));
        agg.abort();
        assert!(matches!(agg.finalize(), Err(SecureError::NoActiveRound)));
    }

    #[test]
    fn uncommitted_sender_poisons_the_round() {
        let ps = group(4, "extra");
        let ids: Vec<u16> = (0..3).collect(); // id 3 not committed
        let q = quantize(&[0.25]).unwrap();
        let mut agg = Aggregator::new(1).unwrap();
        agg.begin_round(1, &ids).unwrap();
        for part in &ps[..3] {
            let m = part.mask_update(&q, 1, &ids).unwrap();
            agg.submit(part.id(), &wire(&m, &ids)).unwrap();
        }
        assert!(agg.is_complete());
        let intruder = ps[3].mask_update(&q, 1, &[0, 1, 2, 3]).unwrap();
        let msg = WireUpdate::new(1, ids.clone(), intruder.values).unwrap().encode();
        assert!(matches!(
            agg.submit(3, &msg),
            Err(SecureError::Protocol(_))
        ));
        assert!(matches!(agg.finalize(), Err(SecureError::Aborted(_))));
    }

    #[test]
    fn duplicate_wrong_round_and_wrong_set_all_poison() {
        let ps = group(2, "poison");
        let ids: Vec<u16> = vec![0, 1];
        let q = quantize(&[0.0]).unwrap();

        let mut agg = Aggregator::new(1).unwrap();
        agg.begin_round(5, &ids).unwrap();
        let m0 = ps[0].mask_update(&q, 5, &ids).unwrap();
        agg.submit(0, &wire(&m0, &ids)).unwrap();
        assert!(agg.submit(0, &wire(&m0, &ids)).is_err());
        assert!(matches!(agg.finalize(), Err(SecureError::Aborted(_))));

        let mut agg = Aggregator::new(1).unwrap();
        agg.begin_round(5, &ids).unwrap();
        let stale = ps[0].mask_update(&q, 4, &ids).unwrap();
        assert!(agg.submit(0, &wire(&stale, &ids)).is_err());

        let mut agg = Aggregator::new(1).unwrap();
        agg.begin_round(5, &ids).unwrap();
        let other_set = WireUpdate::new(5, vec![0, 1, 2], m0.values.clone())
            .unwrap()
            .encode();
        assert!(agg.submit(0, &other_set).is_err());
    }

    #[test]
    fn round_lifecycle_guards() {
        let mut agg = Aggregator::new(1).unwrap();
        assert!(matches!(
            agg.submit(0, &[]),
            Err(SecureError::NoActiveRound)
        ));
        assert!(matches!(
            agg.begin_round(0, &[]),
            Err(SecureError::EmptyParticipants)
        ));
        assert!(matches!(
            agg.begin_round(0, &[1, 1]),
            Err(SecureError::DuplicateParticipant)
        ));
        agg.begin_round(0, &[0]).unwrap();
        assert!(matches!(
            agg.begin_round(1, &[0]),
            Err(SecureError::RoundActive)
        ));
        assert!(Aggregator::new(0).is_err());
    }

    #[test]
    fn consecutive_rounds_use_unrelated_masks_but_agree_on_the_average() {
        let ps = group(2, "isolation");
        let ids: Vec<u16> = vec![0, 1];
        let x = [0.75, -0.5];
        let q = quantize(&x).unwrap();
        let mut outputs = Vec::new();
        let mut transcripts = Vec::new();
        for round in [0u32, 1] {
            let mut agg = Aggregator::new(2).unwrap();
            agg.begin_round(round, &ids).unwrap();
            for part in &ps {
                let m = part.mask_update(&q, round, &ids).unwrap();
                transcripts.push(m.values.clone());
                agg.submit(part.id(), &wire(&m, &ids)).unwrap();
            }
            outputs.push(agg.finalize().unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], x.to_vec());
        assert_ne!(transcripts[0], transcripts[2], "masks must rotate per round");
        assert_ne!(transcripts[1], transcripts[3]);
    }

    /// A single masked transcript should look as uniform as the raw
    /// keystream to a byte-frequency screen.
    #[test]
    fn masked_update_passes_the_uniformity_screen() {
        let ps = group(2, "privacy");
        let ids: Vec<u16> = vec![0, 1];
        let dim = 250_000;
        let q = QuantizedParams {
            values: vec![quantize(&[0.125]).unwrap().values[0]; dim],
        };
        let m = ps[0].mask_update(&q, 0, &ids).unwrap();
        let mut hist = [0u32; 256];
        for w in &m.values {
            for b in w.to_le_bytes() {
                hist[b as usize] += 1;
            }
        }
        let n = (dim * 4) as f64;
        let p = 1.0 / 256.0;
        let mean = n * p;
        let sd = (n * p * (1.0 - p)).sqrt();
        for (b, &c) in hist.iter().enumerate() {
            assert!(
                (c as f64 - mean).abs() <= 4.0 * sd,
                "byte {b}: {c} outside {mean}±{:.0}",
                4.0 * sd
            );
        }
    }
}
