//! Recurrent Q-network: a gated recurrent cell feeding three linear action
//! heads, with training by backpropagation through time over stored
//! sequences.
//!
//! Parameters live in one flat `f64` vector with a fixed layout (see
//! [`Layout`]); gradients use the same layout, which keeps the optimizer,
//! clipping, checkpointing and the aggregation layer trivial.

use crate::env::{ActionVector, AppAction, APP_ACTIONS, CPU_LEVELS, OBS_DIM};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("observation length {got}, expected a multiple of {expected}")]
    ObsShape { got: usize, expected: usize },
    #[error("parameter count {got}, expected {expected}")]
    ParamCount { got: usize, expected: usize },
    #[error("sequence fields misaligned: {0}")]
    Misaligned(String),
    #[error("non-finite loss; batch discarded")]
    NonFiniteLoss,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

/// Network shape: observation width, recurrent width and MAC head width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetDims {
    pub obs: usize,
    pub hidden: usize,
    pub mac: usize,
}

impl NetDims {
    pub fn new(hidden: usize, mac: usize) -> Self {
        Self {
            obs: OBS_DIM,
            hidden,
            mac,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }

    pub fn layout(&self) -> Layout {
        let h = self.hidden;
        let gates = 4 * h;
        let o_wx = 0;
        let o_wh = o_wx + gates * self.obs;
        let o_b = o_wh + gates * h;
        let o_w_app = o_b + gates;
        let o_b_app = o_w_app + APP_ACTIONS * h;
        let o_w_mac = o_b_app + APP_ACTIONS;
        let o_b_mac = o_w_mac + self.mac * h;
        let o_w_cpu = o_b_mac + self.mac;
        let o_b_cpu = o_w_cpu + CPU_LEVELS * h;
        Layout {
            o_wx,
            o_wh,
            o_b,
            o_w_app,
            o_b_app,
            o_w_mac,
            o_b_mac,
            o_w_cpu,
            o_b_cpu,
            len: o_b_cpu + CPU_LEVELS,
        }
    }
}

/// Offsets of each parameter block in the flat vector, which is also the
/// checkpoint serialization order: input-to-gate weights (4H x obs), then
/// recurrent weights (4H x H), gate biases (4H), and the three heads as
/// weight matrix followed by bias (app 2 x H + 2, mac k x H + k, cpu
/// 3 x H + 3). Gate blocks are ordered input, forget, candidate, output;
/// matrices are row-major.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub o_wx: usize,
    pub o_wh: usize,
    pub o_b: usize,
    pub o_w_app: usize,
    pub o_b_app: usize,
    pub o_w_mac: usize,
    pub o_b_mac: usize,
    pub o_w_cpu: usize,
    pub o_b_cpu: usize,
    pub len: usize,
}

/// Recurrent state carried across steps within an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Hidden {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl Hidden {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Q-values for the three action heads at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct QTriple {
    pub app: Vec<f64>,
    pub mac: Vec<f64>,
    pub cpu: Vec<f64>,
}

/// One training sequence plus its importance weight.
#[derive(Debug, Clone, Copy)]
pub struct TrainSequence<'a> {
    /// Flattened observations for steps `0..=T`: row `t` is the observation
    /// acted on at step `t`, row `T` is the final next-observation.
    pub obs_ext: &'a [f64],
    pub actions: &'a [ActionVector],
    pub rewards: &'a [f64],
    pub dones: &'a [bool],
    pub weight: f64,
}

/// Result of one TD update.
#[derive(Debug, Clone)]
pub struct TdOutcome {
    pub loss: f64,
    pub grad_norm: f64,
    /// Mean absolute TD error per sequence, for priority refresh.
    pub td_abs: Vec<f64>,
}

/// Train every head (the default learner configuration).
pub const ALL_HEADS: [bool; 3] = [true, true, true];

struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    dims: NetDims,
    params: Vec<f64>,
}

const CHECKPOINT_VERSION: u8 = 1;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Network {
    /// All-zero network of the given shape.
    pub fn zeros(dims: NetDims) -> Self {
        Self {
            params: vec![0.0; dims.param_count()],
            dims,
        }
    }

    /// Random initialization: weights uniform in +-1/sqrt(H), biases zero
    /// except the forget gate bias at 1 for stable early training.
    pub fn init(dims: NetDims, rng: &mut ChaCha12Rng) -> Self {
        let mut net = Self::zeros(dims);
        let l = dims.layout();
        let bound = 1.0 / (dims.hidden as f64).sqrt();
        for ix in l.o_wx..l.o_b {
            net.params[ix] = rng.gen_range(-bound..=bound);
        }
        for ix in l.o_w_app..l.o_b_app {
            net.params[ix] = rng.gen_range(-bound..=bound);
        }
        for ix in l.o_w_mac..l.o_b_mac {
            net.params[ix] = rng.gen_range(-bound..=bound);
        }
        for ix in l.o_w_cpu..l.o_b_cpu {
            net.params[ix] = rng.gen_range(-bound..=bound);
        }
        for u in 0..dims.hidden {
            net.params[l.o_b + dims.hidden + u] = 1.0;
        }
        net
    }

    pub fn from_params(dims: NetDims, params: Vec<f64>) -> Result<Self, NetError> {
        if params.len() != dims.param_count() {
            return Err(NetError::ParamCount {
                got: params.len(),
                expected: dims.param_count(),
            });
        }
        Ok(Self { dims, params })
    }

    pub fn dims(&self) -> NetDims {
        self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NetError> {
        if params.len() != self.params.len() {
            return Err(NetError::ParamCount {
                got: params.len(),
                expected: self.params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Hard-copies another network's parameters (target sync).
    pub fn sync_from(&mut self, other: &Network) {
        debug_assert_eq!(self.dims, other.dims);
        self.params.copy_from_slice(&other.params);
    }

    fn cell_step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let h = self.dims.hidden;
        let obs = self.dims.obs;
        let l = self.dims.layout();
        let mut z = vec![0.0; 4 * h];
        for u in 0..4 * h {
            let mut acc = self.params[l.o_b + u];
            let wx_row = l.o_wx + u * obs;
            for (xi, &xv) in x.iter().enumerate() {
                acc += self.params[wx_row + xi] * xv;
            }
            let wh_row = l.o_wh + u * h;
            for (hi, &hv) in h_prev.iter().enumerate() {
                acc += self.params[wh_row + hi] * hv;
            }
            z[u] = acc;
        }
        let mut i = vec![0.0; h];
        let mut f = vec![0.0; h];
        let mut g = vec![0.0; h];
        let mut o = vec![0.0; h];
        let mut c = vec![0.0; h];
        let mut tc = vec![0.0; h];
        let mut hv = vec![0.0; h];
        for u in 0..h {
            i[u] = sigmoid(z[u]);
            f[u] = sigmoid(z[h + u]);
            g[u] = z[2 * h + u].tanh();
            o[u] = sigmoid(z[3 * h + u]);
            c[u] = f[u] * c_prev[u] + i[u] * g[u];
            tc[u] = c[u].tanh();
            hv[u] = o[u] * tc[u];
        }
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            c,
            tc,
            h: hv,
        }
    }

    fn heads(&self, hv: &[f64]) -> QTriple {
        let h = self.dims.hidden;
        let l = self.dims.layout();
        let dense = |o_w: usize, o_b: usize, out: usize| -> Vec<f64> {
            (0..out)
                .map(|a| {
                    let row = o_w + a * h;
                    let mut acc = self.params[o_b + a];
                    for (u, &huv) in hv.iter().enumerate() {
                        acc += self.params[row + u] * huv;
                    }
                    acc
                })
                .collect()
        };
        QTriple {
            app: dense(l.o_w_app, l.o_b_app, APP_ACTIONS),
            mac: dense(l.o_w_mac, l.o_b_mac, self.dims.mac),
            cpu: dense(l.o_w_cpu, l.o_b_cpu, CPU_LEVELS),
        }
    }

    /// Advances the recurrent state by one observation and returns the
    /// Q-values for that step.
    pub fn forward_step(&self, x: &[f64], hidden: &mut Hidden) -> Result<QTriple, NetError> {
        if x.len() != self.dims.obs {
            return Err(NetError::ObsShape {
                got: x.len(),
                expected: self.dims.obs,
            });
        }
        let cache = self.cell_step(x, &hidden.h, &hidden.c);
        hidden.h.copy_from_slice(&cache.h);
        hidden.c.copy_from_slice(&cache.c);
        Ok(self.heads(&cache.h))
    }

    /// Runs a whole observation sequence from zero hidden state, returning
    /// the Q-values at every position.
    pub fn forward_sequence(&self, obs_flat: &[f64]) -> Result<Vec<QTriple>, NetError> {
        let obs = self.dims.obs;
        if obs_flat.is_empty() || obs_flat.len() % obs != 0 {
            return Err(NetError::ObsShape {
                got: obs_flat.len(),
                expected: obs,
            });
        }
        let steps = obs_flat.len() / obs;
        let mut hidden = Hidden::zeros(self.dims.hidden);
        let mut out = Vec::with_capacity(steps);
        for t in 0..steps {
            out.push(self.forward_step(&obs_flat[t * obs..(t + 1) * obs], &mut hidden)?);
        }
        Ok(out)
    }

    fn check_sequence(&self, seq: &TrainSequence) -> Result<usize, NetError> {
        let obs = self.dims.obs;
        let t = seq.actions.len();
        if t == 0 {
            return Err(NetError::Misaligned("empty sequence".into()));
        }
        if seq.rewards.len() != t || seq.dones.len() != t {
            return Err(NetError::Misaligned(format!(
                "actions {t}, rewards {}, dones {}",
                seq.rewards.len(),
                seq.dones.len()
            )));
        }
        if seq.obs_ext.len() != (t + 1) * obs {
            return Err(NetError::Misaligned(format!(
                "obs_ext len {} for {t} steps of width {obs}",
                seq.obs_ext.len()
            )));
        }
        Ok(t)
    }

    /// Computes the importance-weighted TD loss over a batch of sequences and
    /// its gradient via backpropagation through time from zero hidden state.
    ///
    /// Each head is an independent Q-function bootstrapped from the target
    /// network: `y = r + gamma * max Q_target(next)` (just `r` at terminal
    /// steps). The loss is the weighted sum of squared TD errors over batch,
    /// steps and heads; scale is kept in check by norm clipping in
    /// [`Network::td_update`]. Also returns each sequence's mean absolute TD
    /// error.
    pub fn td_loss_and_grad(
        &self,
        target: &Network,
        batch: &[TrainSequence],
        gamma: f64,
    ) -> Result<(f64, Vec<f64>, Vec<f64>), NetError> {
        self.td_loss_and_grad_heads(target, batch, gamma, ALL_HEADS)
    }

    /// [`Network::td_loss_and_grad`] restricted to a subset of heads
    /// (app, mac, cpu); disabled heads contribute neither loss nor
    /// gradient, as in single-head baseline learners.
    pub fn td_loss_and_grad_heads(
        &self,
        target: &Network,
        batch: &[TrainSequence],
        gamma: f64,
        enabled: [bool; 3],
    ) -> Result<(f64, Vec<f64>, Vec<f64>), NetError> {
        let h = self.dims.hidden;
        let obs = self.dims.obs;
        let l = self.dims.layout();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let mut td_abs = Vec::with_capacity(batch.len());
        let heads_per_step = enabled.iter().filter(|&&e| e).count() as f64;
        if heads_per_step == 0.0 {
            return Err(NetError::Misaligned("no heads enabled".into()));
        }

        for seq in batch {
            let t_len = self.check_sequence(seq)?;
            let scale = seq.weight;

            // Online pass with caches; target pass over the shifted sequence.
            let mut caches = Vec::with_capacity(t_len);
            let mut hidden = Hidden::zeros(h);
            for t in 0..t_len {
                let cache = self.cell_step(&seq.obs_ext[t * obs..(t + 1) * obs], &hidden.h, &hidden.c);
                hidden.h.copy_from_slice(&cache.h);
                hidden.c.copy_from_slice(&cache.c);
                caches.push(cache);
            }
            let target_qs = target.forward_sequence(seq.obs_ext)?;

            // Head-level errors and gradient seeds per step.
            let mut dh_acc = vec![vec![0.0; h]; t_len];
            let mut seq_td = 0.0;
            for t in 0..t_len {
                let q = self.heads(&caches[t].h);
                let next = &target_qs[t + 1];
                let bootstrap = |vals: &[f64]| -> f64 {
                    vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                };
                let action = seq.actions[t];
                let cont = if seq.dones[t] { 0.0 } else { gamma };
                let picks = [
                    (
                        match action.app {
                            AppAction::Local => 0,
                            AppAction::Offload => 1,
                        },
                        &q.app,
                        &next.app,
                        l.o_w_app,
                        l.o_b_app,
                    ),
                    (action.mac, &q.mac, &next.mac, l.o_w_mac, l.o_b_mac),
                    (action.cpu_level, &q.cpu, &next.cpu, l.o_w_cpu, l.o_b_cpu),
                ];
                for (which, (a, qs, next_qs, o_w, o_b)) in picks.into_iter().enumerate() {
                    if !enabled[which] {
                        continue;
                    }
                    let y = seq.rewards[t] + cont * bootstrap(next_qs);
                    let e = qs[a] - y;
                    loss += scale * e * e;
                    seq_td += e.abs();
                    let dq = 2.0 * scale * e;
                    grad[o_b + a] += dq;
                    let row = o_w + a * h;
                    for u in 0..h {
                        grad[row + u] += dq * caches[t].h[u];
                        dh_acc[t][u] += self.params[row + u] * dq;
                    }
                }
            }
            td_abs.push(seq_td / (t_len as f64 * heads_per_step));

            // Backward through time.
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            for t in (0..t_len).rev() {
                let cache = &caches[t];
                let mut dz = vec![0.0; 4 * h];
                for u in 0..h {
                    let dh = dh_acc[t][u] + dh_next[u];
                    let do_ = dh * cache.tc[u];
                    let dtc = dh * cache.o[u];
                    let dc = dc_next[u] + dtc * (1.0 - cache.tc[u] * cache.tc[u]);
                    let di = dc * cache.g[u];
                    let dg = dc * cache.i[u];
                    let df = dc * cache.c_prev[u];
                    dc_next[u] = dc * cache.f[u];
                    dz[u] = di * cache.i[u] * (1.0 - cache.i[u]);
                    dz[h + u] = df * cache.f[u] * (1.0 - cache.f[u]);
                    dz[2 * h + u] = dg * (1.0 - cache.g[u] * cache.g[u]);
                    dz[3 * h + u] = do_ * cache.o[u] * (1.0 - cache.o[u]);
                }
                for u in 0..4 * h {
                    grad[l.o_b + u] += dz[u];
                    let wx_row = l.o_wx + u * obs;
                    for (xi, &xv) in cache.x.iter().enumerate() {
                        grad[wx_row + xi] += dz[u] * xv;
                    }
                    let wh_row = l.o_wh + u * h;
                    for (hi, &hv) in cache.h_prev.iter().enumerate() {
                        grad[wh_row + hi] += dz[u] * hv;
                    }
                }
                for v in 0..h {
                    let mut acc = 0.0;
                    for u in 0..4 * h {
                        acc += self.params[l.o_wh + u * h + v] * dz[u];
                    }
                    dh_next[v] = acc;
                }
            }
        }
        Ok((loss, grad, td_abs))
    }

    /// One optimization step: BPTT gradient, global norm clipping, then a
    /// plain gradient-descent update. A non-finite loss leaves the
    /// parameters untouched.
    pub fn td_update(
        &mut self,
        target: &Network,
        batch: &[TrainSequence],
        gamma: f64,
        lr: f64,
        clip_norm: f64,
    ) -> Result<TdOutcome, NetError> {
        self.td_update_heads(target, batch, gamma, lr, clip_norm, ALL_HEADS)
    }

    /// [`Network::td_update`] restricted to a subset of heads.
    pub fn td_update_heads(
        &mut self,
        target: &Network,
        batch: &[TrainSequence],
        gamma: f64,
        lr: f64,
        clip_norm: f64,
        enabled: [bool; 3],
    ) -> Result<TdOutcome, NetError> {
        let (loss, mut grad, td_abs) = self.td_loss_and_grad_heads(target, batch, gamma, enabled)?;
        if !loss.is_finite() {
            return Err(NetError::NonFiniteLoss);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > clip_norm && norm > 0.0 {
            let s = clip_norm / norm;
            for g in grad.iter_mut() {
                *g *= s;
            }
        }
        for (p, g) in self.params.iter_mut().zip(&grad) {
            *p -= lr * g;
        }
        Ok(TdOutcome {
            loss,
            grad_norm: norm,
            td_abs,
        })
    }

    /// Serializes as: version u8, hidden u32, mac u32, obs u32, count u64,
    /// then parameters as little-endian f64 in layout order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + 4 * 3 + 8 + self.params.len() * 8);
        out.push(CHECKPOINT_VERSION);
        out.extend((self.dims.hidden as u32).to_le_bytes());
        out.extend((self.dims.mac as u32).to_le_bytes());
        out.extend((self.dims.obs as u32).to_le_bytes());
        out.extend((self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend(p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        let mut r = bytes;
        let mut u8b = [0u8; 1];
        let mut u32b = [0u8; 4];
        let mut u64b = [0u8; 8];
        let fail = |what: &str| NetError::Checkpoint(format!("truncated reading {what}"));
        r.read_exact(&mut u8b).map_err(|_| fail("version"))?;
        if u8b[0] != CHECKPOINT_VERSION {
            return Err(NetError::Checkpoint(format!(
                "unsupported version {}",
                u8b[0]
            )));
        }
        r.read_exact(&mut u32b).map_err(|_| fail("hidden"))?;
        let hidden = u32::from_le_bytes(u32b) as usize;
        r.read_exact(&mut u32b).map_err(|_| fail("mac"))?;
        let mac = u32::from_le_bytes(u32b) as usize;
        r.read_exact(&mut u32b).map_err(|_| fail("obs"))?;
        let obs = u32::from_le_bytes(u32b) as usize;
        r.read_exact(&mut u64b).map_err(|_| fail("count"))?;
        let count = u64::from_le_bytes(u64b) as usize;
        let dims = NetDims { obs, hidden, mac };
        if count != dims.param_count() {
            return Err(NetError::Checkpoint(format!(
                "count {count} does not match dims {dims:?}"
            )));
        }
        let mut params = Vec::with_capacity(count);
        let mut f64b = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut f64b).map_err(|_| fail("params"))?;
            params.push(f64::from_le_bytes(f64b));
        }
        if !r.is_empty() {
            return Err(NetError::Checkpoint(format!(
                "{} trailing bytes",
                r.len()
            )));
        }
        Self::from_params(dims, params)
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
