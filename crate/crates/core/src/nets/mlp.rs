use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Discriminator outputs are clamped to `[1e-5, 1 - 1e-5]` inside losses
/// and guidance.
pub const DEFAULT_TRUNCATION: f64 = 1e-5;

/// Lowest and highest sinusoidal embedding frequencies.
const FREQ_MIN: f64 = 1.0;
const FREQ_MAX: f64 = 1000.0;

/// Which head the network carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// Vector output with the data dimension.
    Score,
    /// Scalar logit; probabilities go through a sigmoid.
    Discriminator,
}

/// Architecture descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arch {
    pub data_dim: usize,
    pub hidden: Vec<usize>,
    pub time_embed: usize,
    pub head: HeadKind,
}

impl Arch {
    /// Default stack: three tanh layers of width 128, embedding size 32.
    pub fn standard(data_dim: usize, head: HeadKind) -> Self {
        Arch { data_dim, hidden: vec![128, 128, 128], time_embed: 32, head }
    }

    pub fn out_dim(&self) -> usize {
        match self.head {
            HeadKind::Score => self.data_dim,
            HeadKind::Discriminator => 1,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.data_dim + self.time_embed
    }

    /// `(in, out)` per layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.in_dim();
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.out_dim()));
        dims
    }

    fn validate(&self) -> Result<()> {
        if self.data_dim == 0 {
            return Err(Error::Usage("data dimension must be positive".into()));
        }
        if self.time_embed == 0 || self.time_embed % 2 != 0 {
            return Err(Error::Usage(format!(
                "time embedding size must be a positive even number, got {}",
                self.time_embed
            )));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Usage("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    /// Row-major `out x in`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Layer {
    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.w[r * self.in_dim..(r + 1) * self.in_dim];
            // Fixed 8-lane accumulation: vectorizes while keeping a
            // deterministic summation order.
            let mut acc = [0.0f64; 8];
            for (rw, xv) in row.chunks_exact(8).zip(x.chunks_exact(8)) {
                for l in 0..8 {
                    acc[l] += rw[l] * xv[l];
                }
            }
            let mut tail = 0.0;
            for (rw, xv) in row
                .chunks_exact(8)
                .remainder()
                .iter()
                .zip(x.chunks_exact(8).remainder())
            {
                tail += rw * xv;
            }
            let half = [acc[0] + acc[4], acc[1] + acc[5], acc[2] + acc[6], acc[3] + acc[7]];
            *o += ((half[0] + half[2]) + (half[1] + half[3])) + tail;
        }
        out
    }
}

/// Weights of a small fully connected network with a time embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub arch: Arch,
    pub(crate) layers: Vec<Layer>,
}

/// Per-layer gradient accumulator with the same shapes as the parameters.
#[derive(Debug, Clone)]
pub(crate) struct GradBuf {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl GradBuf {
    pub fn zeros_like(params: &NetParams) -> Self {
        GradBuf {
            w: params.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: params.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.w.iter_mut().chain(self.b.iter_mut()) {
            for g in layer.iter_mut() {
                *g *= factor;
            }
        }
    }
}

/// Cached activations of one forward pass, consumed by backprop.
pub(crate) struct Trace {
    /// Inputs to each layer; `acts[0]` is the embedded input.
    pub acts: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pub pre: Vec<Vec<f64>>,
}

pub(crate) fn embed_time(t: f64, size: usize) -> Vec<f64> {
    let half = size / 2;
    let ratio = if half > 1 {
        (FREQ_MAX / FREQ_MIN).powf(1.0 / (half - 1) as f64)
    } else {
        1.0
    };
    let mut emb = Vec::with_capacity(size);
    let mut freq = FREQ_MIN;
    for _ in 0..half {
        let (s, c) = (freq * t).sin_cos();
        emb.push(s);
        emb.push(c);
        freq *= ratio;
    }
    emb
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl NetParams {
    /// All weights and biases zero.
    pub fn zeros(arch: Arch) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_dims()
            .iter()
            .map(|&(i, o)| Layer { w: vec![0.0; i * o], b: vec![0.0; o], in_dim: i, out_dim: o })
            .collect();
        Ok(NetParams { arch, layers })
    }

    /// Xavier-uniform initialization, deterministic per seed.
    pub fn init(arch: Arch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layer_dims()
            .iter()
            .map(|&(i, o)| {
                let limit = (6.0 / (i + o) as f64).sqrt();
                Layer {
                    w: (0..i * o).map(|_| rng.random_range(-limit..limit)).collect(),
                    b: vec![0.0; o],
                    in_dim: i,
                    out_dim: o,
                }
            })
            .collect();
        Ok(NetParams { arch, layers })
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.data_dim {
            return Err(Error::Shape { expected: self.arch.data_dim, got: x.len() });
        }
        Ok(())
    }

    pub(crate) fn forward_raw(&self, x: &[f64], t: f64) -> (Vec<f64>, Trace) {
        let mut input = Vec::with_capacity(self.arch.in_dim());
        input.extend_from_slice(x);
        input.extend(embed_time(t, self.arch.time_embed));

        let n_layers = self.layers.len();
        let mut acts = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        let mut a = input;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.matvec(&a);
            acts.push(a);
            let next = if l + 1 < n_layers {
                z.iter().map(|&v| v.tanh()).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            a = next;
        }
        (a, Trace { acts, pre })
    }

    /// Backpropagate `out_grad` (gradient at the raw network output) down to
    /// the parameters, accumulating into `grads`. Returns the gradient with
    /// respect to the data part of the input.
    pub(crate) fn backward(&self, trace: &Trace, out_grad: &[f64], grads: Option<&mut GradBuf>) -> Vec<f64> {
        let n_layers = self.layers.len();
        let mut delta = out_grad.to_vec();
        let mut grads = grads;
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let act = &trace.acts[l];
            if let Some(buf) = grads.as_deref_mut() {
                let gw = &mut buf.w[l];
                for (r, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut gw[r * layer.in_dim..(r + 1) * layer.in_dim];
                    for (g, &a) in row.iter_mut().zip(act) {
                        *g += d * a;
                    }
                }
                for (g, &d) in buf.b[l].iter_mut().zip(&delta) {
                    *g += d;
                }
            }
            // Gradient through the layer input.
            let mut upstream = vec![0.0; layer.in_dim];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.w[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (u, &w) in upstream.iter_mut().zip(row) {
                    *u += d * w;
                }
            }
            if l > 0 {
                // Undo the tanh of the previous layer.
                for (u, &z) in upstream.iter_mut().zip(&trace.pre[l - 1]) {
                    let th = z.tanh();
                    *u *= 1.0 - th * th;
                }
            }
            delta = upstream;
        }
        delta.truncate(self.arch.data_dim);
        delta
    }

    /// Score-head forward pass.
    pub fn forward_score(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        if self.arch.head != HeadKind::Score {
            return Err(Error::Usage("forward_score on a discriminator head".into()));
        }
        self.check_input(x)?;
        Ok(self.forward_raw(x, t).0)
    }

    /// Raw discriminator logit.
    pub fn disc_logit(&self, x: &[f64], t: f64) -> Result<f64> {
        if self.arch.head != HeadKind::Discriminator {
            return Err(Error::Usage("disc_logit on a score head".into()));
        }
        self.check_input(x)?;
        Ok(self.forward_raw(x, t).0[0])
    }

    /// Discriminator probability in (0, 1).
    pub fn forward_disc(&self, x: &[f64], t: f64) -> Result<f64> {
        Ok(sigmoid(self.disc_logit(x, t)?))
    }

    /// Discriminator probability clamped to `[trunc, 1 - trunc]`.
    pub fn forward_disc_truncated(&self, x: &[f64], t: f64, trunc: f64) -> Result<f64> {
        Ok(self.forward_disc(x, t)?.clamp(trunc, 1.0 - trunc))
    }

    /// Truncated log odds `log(d / (1 - d))`, the learned log density ratio.
    pub fn log_odds(&self, x: &[f64], t: f64, trunc: f64) -> Result<f64> {
        let bound = super::log_odds_bound(trunc);
        Ok(self.disc_logit(x, t)?.clamp(-bound, bound))
    }

    /// Input-gradient of the truncated log odds: zero wherever the
    /// truncation is active, the logit's input gradient elsewhere.
    pub fn log_odds_input_grad(&self, x: &[f64], t: f64, trunc: f64) -> Result<Vec<f64>> {
        if self.arch.head != HeadKind::Discriminator {
            return Err(Error::Usage("log_odds_input_grad on a score head".into()));
        }
        self.check_input(x)?;
        let (out, trace) = self.forward_raw(x, t);
        let bound = super::log_odds_bound(trunc);
        if out[0].abs() >= bound {
            return Ok(vec![0.0; self.arch.data_dim]);
        }
        Ok(self.backward(&trace, &[1.0], None))
    }
}
