//! A small fully-connected Q-network, written out by hand.
//!
//! The network maps a state vector to one Q-value per action: ReLU hidden
//! layers, linear output, f64 throughout. Training minimises the squared
//! error of the *selected* action's Q-value only — the gradient of every
//! other output is zero — with either Adam or plain SGD. Gradients are
//! verified against central finite differences in the test suite.
//!
//! Weights can be checkpointed to a versioned little-endian binary file
//! and restored bit-for-bit.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("network shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid layer sizes {0:?}: need at least input and output, all non-zero")]
    InvalidSizes(Vec<usize>),
    #[error("action index {action} out of range ({actions} outputs)")]
    ActionOutOfRange { action: usize, actions: usize },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const CHECKPOINT_MAGIC: [u8; 4] = *b"LQNW";
const CHECKPOINT_VERSION: u32 = 1;

/// One dense layer, weights stored row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
struct Layer {
    w: Vec<f64>,
    b: Vec<f64>,
    inputs: usize,
    outputs: usize,
}

impl Layer {
    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.w
                .chunks_exact(self.inputs)
                .zip(&self.b)
                .map(|(row, b)| b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()),
        );
    }
}

/// A feed-forward action-value network.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
}

impl QNetwork {
    /// Builds a network with He-style uniform initialisation: each weight
    /// drawn from `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, biases zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, NnError> {
        Self::build(sizes, |inputs, w| {
            let limit = (6.0 / inputs as f64).sqrt();
            for v in w {
                *v = rng.random_range(-limit..limit);
            }
        })
    }

    /// All-zero weights and biases; mainly useful in tests.
    pub fn zeros(sizes: &[usize]) -> Result<Self, NnError> {
        Self::build(sizes, |_, _| {})
    }

    fn build(sizes: &[usize], mut init: impl FnMut(usize, &mut [f64])) -> Result<Self, NnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::InvalidSizes(sizes.to_vec()));
        }
        let layers = sizes
            .windows(2)
            .map(|io| {
                let (inputs, outputs) = (io[0], io[1]);
                let mut w = vec![0.0; inputs * outputs];
                init(inputs, &mut w);
                Layer { w, b: vec![0.0; outputs], inputs, outputs }
            })
            .collect();
        Ok(Self { sizes: sizes.to_vec(), layers })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Q-values for a state: ReLU after every layer except the last.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if i != last {
                for v in &mut next {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Copies all weights from `src`; shapes must match exactly. The copy
    /// is bit-identical.
    pub fn copy_weights_from(&mut self, src: &QNetwork) -> Result<(), NnError> {
        if self.sizes != src.sizes {
            return Err(NnError::ShapeMismatch(self.sizes.clone(), src.sizes.clone()));
        }
        for (dst, s) in self.layers.iter_mut().zip(&src.layers) {
            dst.w.copy_from_slice(&s.w);
            dst.b.copy_from_slice(&s.b);
        }
        Ok(())
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub(crate) fn param(&self, idx: usize) -> f64 {
        let mut i = idx;
        for l in &self.layers {
            if i < l.w.len() {
                return l.w[i];
            }
            i -= l.w.len();
            if i < l.b.len() {
                return l.b[i];
            }
            i -= l.b.len();
        }
        panic!("parameter index {idx} out of range");
    }

    pub(crate) fn param_mut(&mut self, idx: usize) -> &mut f64 {
        let mut i = idx;
        for l in &mut self.layers {
            if i < l.w.len() {
                return &mut l.w[i];
            }
            i -= l.w.len();
            if i < l.b.len() {
                return &mut l.b[i];
            }
            i -= l.b.len();
        }
        panic!("parameter index {idx} out of range");
    }

    /// Writes the network to a versioned little-endian binary file:
    /// magic, format version, layer-size list, then per layer all weights
    /// (row-major) followed by biases, every value an LE f64.
    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let mut buf = Vec::with_capacity(16 + self.param_count() * 8);
        buf.extend_from_slice(&CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.sizes.len() as u32).to_le_bytes());
        for &s in &self.sizes {
            buf.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for l in &self.layers {
            for v in l.w.iter().chain(&l.b) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// Restores a network written by [`QNetwork::save`].
    pub fn load(path: &Path) -> Result<Self, NnError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut off = 0usize;
        let take = |off: &mut usize, n: usize| -> Result<&[u8], NnError> {
            let s = bytes
                .get(*off..*off + n)
                .ok_or_else(|| NnError::BadCheckpoint("truncated file".into()))?;
            *off += n;
            Ok(s)
        };
        if take(&mut off, 4)? != CHECKPOINT_MAGIC {
            return Err(NnError::BadCheckpoint("bad magic".into()));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let version = u32_at(take(&mut off, 4)?);
        if version != CHECKPOINT_VERSION {
            return Err(NnError::BadCheckpoint(format!("unsupported version {version}")));
        }
        let n_sizes = u32_at(take(&mut off, 4)?) as usize;
        if !(2..=64).contains(&n_sizes) {
            return Err(NnError::BadCheckpoint(format!("implausible layer count {n_sizes}")));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            sizes.push(u32_at(take(&mut off, 4)?) as usize);
        }
        let mut net = Self::zeros(&sizes)?;
        for l in &mut net.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
            }
        }
        if off != bytes.len() {
            return Err(NnError::BadCheckpoint("trailing bytes".into()));
        }
        Ok(net)
    }
}

/// One supervised sample for [`Trainer::step`]: regress the Q-value of
/// `action` in `state` towards `target`.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub state: Vec<f64>,
    pub action: usize,
    pub target: f64,
}

/// Gradient-descent flavour used by the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Optimiser state for one network. Owns the Adam moment estimates and the
/// scratch buffers reused across steps, so repeated training does not
/// allocate.
#[derive(Debug, Clone)]
pub struct Trainer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    /// First/second moment per layer, weights then biases, same layout as
    /// the layer parameters.
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Trainer {
    pub fn new(net: &QNetwork, kind: OptimizerKind, lr: f64) -> Self {
        let shapes: Vec<usize> = net.layers.iter().map(|l| l.w.len() + l.b.len()).collect();
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            grads: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            acts: net.sizes.iter().map(|&n| Vec::with_capacity(n)).collect(),
            deltas: net.sizes.iter().map(|&n| Vec::with_capacity(n)).collect(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// One gradient step on a batch. Loss is the batch-mean squared error
    /// of the selected actions' Q-values; the returned value is that loss
    /// before the update.
    pub fn step(&mut self, net: &mut QNetwork, batch: &[TrainSample]) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        for g in &mut self.grads {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for sample in batch {
            if sample.state.len() != net.input_dim() {
                return Err(NnError::DimensionMismatch {
                    expected: net.input_dim(),
                    got: sample.state.len(),
                });
            }
            if sample.action >= net.output_dim() {
                return Err(NnError::ActionOutOfRange {
                    action: sample.action,
                    actions: net.output_dim(),
                });
            }
            loss += self.accumulate(net, sample, scale);
        }
        self.apply(net);
        Ok(loss * scale)
    }

    /// Forward + backward for one sample; accumulates `scale * dL/dp` into
    /// the gradient buffers and returns the sample's squared error.
    fn accumulate(&mut self, net: &QNetwork, sample: &TrainSample, scale: f64) -> f64 {
        let last = net.layers.len() - 1;
        self.acts[0].clear();
        self.acts[0].extend_from_slice(&sample.state);
        for (i, layer) in net.layers.iter().enumerate() {
            let (lo, hi) = self.acts.split_at_mut(i + 1);
            layer.forward_into(&lo[i], &mut hi[0]);
            if i != last {
                for v in &mut hi[0] {
                    *v = v.max(0.0);
                }
            }
        }

        let q = self.acts[last + 1][sample.action];
        let err = q - sample.target;

        // d(err^2)/dq on the chosen output, zero elsewhere.
        let out_delta = &mut self.deltas[last + 1];
        out_delta.clear();
        out_delta.resize(net.output_dim(), 0.0);
        out_delta[sample.action] = 2.0 * err * scale;

        for i in (0..net.layers.len()).rev() {
            let layer = &net.layers[i];
            let (din, dout) = {
                let (lo, hi) = self.deltas.split_at_mut(i + 1);
                (&mut lo[i], &hi[0])
            };
            let grad = &mut self.grads[i];
            let (gw, gb) = grad.split_at_mut(layer.w.len());
            let x = &self.acts[i];
            for (o, &d) in dout.iter().enumerate() {
                if d != 0.0 {
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, xv) in row.iter_mut().zip(x) {
                        *g += d * xv;
                    }
                    gb[o] += d;
                }
            }
            if i > 0 {
                din.clear();
                din.resize(layer.inputs, 0.0);
                for (o, &d) in dout.iter().enumerate() {
                    if d != 0.0 {
                        let row = &layer.w[o * layer.inputs..(o + 1) * layer.inputs];
                        for (dv, w) in din.iter_mut().zip(row) {
                            *dv += d * w;
                        }
                    }
                }
                // ReLU gate: activations of layer i's input came through a
                // ReLU (i > 0), so kill gradients where the unit was off.
                for (dv, &a) in din.iter_mut().zip(x) {
                    if a <= 0.0 {
                        *dv = 0.0;
                    }
                }
            }
        }
        err * err
    }

    fn apply(&mut self, net: &mut QNetwork) {
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, grad) in net.layers.iter_mut().zip(&self.grads) {
                    let (gw, gb) = grad.split_at(layer.w.len());
                    for (p, g) in layer.w.iter_mut().zip(gw).chain(layer.b.iter_mut().zip(gb)) {
                        *p -= self.lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let bc1 = 1.0 - self.beta1.powi(self.t as i32);
                let bc2 = 1.0 - self.beta2.powi(self.t as i32);
                for ((layer, grad), (m, v)) in
                    net.layers.iter_mut().zip(&self.grads).zip(self.m.iter_mut().zip(&mut self.v))
                {
                    let (gw, gb) = grad.split_at(layer.w.len());
                    let params = layer.w.iter_mut().chain(layer.b.iter_mut());
                    for (((p, &g), m), v) in
                        params.zip(gw.iter().chain(gb)).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                        let mhat = *m / bc1;
                        let vhat = *v / bc2;
                        *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
                    }
                }
            }
        }
    }

    /// Analytic gradient of `(Q(state)[action] - target)^2` with respect
    /// to every parameter, in flat parameter order. Used by the gradient
    /// check.
    fn analytic_gradient(
        &mut self,
        net: &QNetwork,
        sample: &TrainSample,
    ) -> Result<Vec<f64>, NnError> {
        for g in &mut self.grads {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        if sample.state.len() != net.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: net.input_dim(),
                got: sample.state.len(),
            });
        }
        self.accumulate(net, sample, 1.0);
        let mut flat = Vec::with_capacity(net.param_count());
        for g in &self.grads {
            flat.extend_from_slice(g);
        }
        Ok(flat)
    }
}

/// Compares the network's analytic gradients against central finite
/// differences (step `1e-5`) for one `(state, action, target)` sample and
/// returns the worst per-parameter error
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)`.
///
/// Healthy gradients score well below `1e-4`; a corrupted or stale
/// gradient shows up orders of magnitude above that.
pub fn gradient_check(
    net: &QNetwork,
    state: &[f64],
    action: usize,
    target: f64,
) -> Result<f64, NnError> {
    const H: f64 = 1e-5;
    let sample = TrainSample { state: state.to_vec(), action, target };
    let mut trainer = Trainer::new(net, OptimizerKind::Sgd, 0.0);
    let analytic = trainer.analytic_gradient(net, &sample)?;

    let mut probe = net.clone();
    let loss = |n: &QNetwork| -> Result<f64, NnError> {
        let q = n.forward(state)?[action];
        Ok((q - target) * (q - target))
    };
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.param(i);
        *probe.param_mut(i) = orig + H;
        let up = loss(&probe)?;
        *probe.param_mut(i) = orig - H;
        let down = loss(&probe)?;
        *probe.param_mut(i) = orig;
        let numeric = (up - down) / (2.0 * H);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(err);
    }
    Ok(worst)
}
