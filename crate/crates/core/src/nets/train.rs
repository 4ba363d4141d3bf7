use crate::error::{Error, Result};
use crate::nets::mlp::{sigmoid, GradBuf, HeadKind, NetParams};
use crate::oracle::GaussianMixture;
use crate::sde::ScheduleSpec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Temporal weight lambda(t).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Uniform,
    /// Likelihood-style weighting `lambda(t) = g_t^2`.
    GSquared,
}

impl Weighting {
    pub fn eval(&self, spec: &ScheduleSpec, t: f64) -> Result<f64> {
        match self {
            Weighting::Uniform => Ok(1.0),
            Weighting::GSquared => {
                let (_, g, _) = spec.eval(t)?;
                Ok(g * g)
            }
        }
    }
}

/// Learning-rate schedule over the training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from `lr` to zero across the configured steps; the
    /// final parameters sit at the optimizer's converged mean instead of
    /// its stationary noise band.
    Cosine,
}

impl LrSchedule {
    fn factor(&self, step: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => {
                let frac = step as f64 / total.max(1) as f64;
                0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

/// Training hyperparameters; one config drives either loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch: usize,
    pub steps: usize,
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Lower edge of the time-sampling interval; times are uniform on
    /// `[t_eps, t_max]`.
    pub t_eps: f64,
    pub weighting: Weighting,
    /// Discriminator truncation bound.
    pub truncation: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch: 128,
            steps: 1000,
            lr: 1e-3,
            lr_schedule: LrSchedule::Cosine,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            t_eps: 1e-3,
            weighting: Weighting::Uniform,
            truncation: 1e-5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Usage("batch size must be positive".into()));
        }
        if !(self.t_eps > 0.0) {
            return Err(Error::Domain(format!("t_eps must be positive, got {}", self.t_eps)));
        }
        if !(self.truncation > 0.0 && self.truncation < 0.5) {
            return Err(Error::Domain(format!(
                "truncation must lie in (0, 0.5), got {}",
                self.truncation
            )));
        }
        if !(self.lr >= 0.0) {
            return Err(Error::Domain(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Where training batches come from: an analytic mixture or a frozen
/// point set.
#[derive(Debug, Clone)]
pub enum DataSource {
    Mixture(GaussianMixture),
    Points(Vec<Vec<f64>>),
}

impl DataSource {
    pub fn dim(&self) -> usize {
        match self {
            DataSource::Mixture(g) => g.dim(),
            DataSource::Points(p) => p.first().map_or(0, |row| row.len()),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        match self {
            DataSource::Mixture(g) => g.sample_n(n, rng),
            DataSource::Points(p) => (0..n)
                .map(|_| p[rng.random_range(0..p.len())].clone())
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let DataSource::Points(p) = self {
            if p.is_empty() {
                return Err(Error::Usage("empty point source".into()));
            }
            let dim = p[0].len();
            if dim == 0 || p.iter().any(|row| row.len() != dim) {
                return Err(Error::Shape { expected: dim, got: 0 });
            }
        }
        Ok(())
    }
}

/// What to run the residual through.
enum ScoreEval<'a> {
    Fn(&'a dyn Fn(&[f64], f64) -> Vec<f64>),
    Net(&'a NetParams, &'a mut GradBuf),
}

/// One denoising regression term: draws `t` and noise, perturbs `x0`, and
/// returns the weighted squared residual against the conditional score
/// target `-eps / s_t`. The network path accumulates parameter gradients.
fn score_sample_term<R: Rng + ?Sized>(
    eval: &mut ScoreEval<'_>,
    x0: &[f64],
    spec: &ScheduleSpec,
    weighting: Weighting,
    t_eps: f64,
    rng: &mut R,
) -> Result<f64> {
    let t = rng.random_range(t_eps..spec.t_max);
    let noise: Vec<f64> = (0..x0.len()).map(|_| rng.sample(StandardNormal)).collect();
    let k = spec.kernel_coeffs(t)?;
    let xt: Vec<f64> = x0
        .iter()
        .zip(&noise)
        .map(|(&x, &e)| k.mean_scale * x + k.std * e)
        .collect();
    let target: Vec<f64> = noise.iter().map(|&e| -e / k.std).collect();
    let lambda = weighting.eval(spec, t)?;

    let residual: Vec<f64> = match eval {
        ScoreEval::Fn(f) => {
            let out = f(&xt, t);
            if out.len() != x0.len() {
                return Err(Error::Shape { expected: x0.len(), got: out.len() });
            }
            out.iter().zip(&target).map(|(&a, &b)| a - b).collect()
        }
        ScoreEval::Net(params, grads) => {
            let (out, trace) = params.forward_raw(&xt, t);
            let r: Vec<f64> = out.iter().zip(&target).map(|(&a, &b)| a - b).collect();
            let out_grad: Vec<f64> = r.iter().map(|&v| lambda * v).collect();
            params.backward(&trace, &out_grad, Some(grads));
            r
        }
    };
    Ok(0.5 * lambda * residual.iter().map(|&v| v * v).sum::<f64>())
}

/// Monte-Carlo score-matching loss of an arbitrary score function:
/// `1/2 int lambda(t) E || s(x_t, t) - grad log p(x_t | x_0) ||^2 dt`
/// estimated over the batch with uniform time sampling.
pub fn score_loss_with<R: Rng + ?Sized>(
    score: &dyn Fn(&[f64], f64) -> Vec<f64>,
    batch: &[Vec<f64>],
    spec: &ScheduleSpec,
    weighting: Weighting,
    t_eps: f64,
    rng: &mut R,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Usage("empty batch".into()));
    }
    let mut eval = ScoreEval::Fn(score);
    let mut acc = 0.0;
    for x0 in batch {
        acc += score_sample_term(&mut eval, x0, spec, weighting, t_eps, rng)?;
    }
    Ok((spec.t_max - t_eps) * acc / batch.len() as f64)
}

/// Score-matching loss of a network.
pub fn score_loss<R: Rng + ?Sized>(
    params: &NetParams,
    batch: &[Vec<f64>],
    spec: &ScheduleSpec,
    weighting: Weighting,
    t_eps: f64,
    rng: &mut R,
) -> Result<f64> {
    if params.arch.head != HeadKind::Score {
        return Err(Error::Usage("score_loss needs a score head".into()));
    }
    let f = |x: &[f64], t: f64| params.forward_score(x, t).expect("dims checked");
    score_loss_with(&f, batch, spec, weighting, t_eps, rng)
}

enum DiscEval<'a> {
    Fn(&'a dyn Fn(&[f64], f64) -> f64),
    Net(&'a NetParams, &'a mut GradBuf),
}

/// One BCE term over a (real, fake) pair sharing the time draw.
#[allow(clippy::too_many_arguments)]
fn disc_pair_term<R: Rng + ?Sized>(
    eval: &mut DiscEval<'_>,
    real: &[f64],
    fake: &[f64],
    spec: &ScheduleSpec,
    weighting: Weighting,
    t_eps: f64,
    trunc: f64,
    rng: &mut R,
) -> Result<f64> {
    let t = rng.random_range(t_eps..spec.t_max);
    let k = spec.kernel_coeffs(t)?;
    let perturb = |x0: &[f64], rng: &mut R| -> Vec<f64> {
        x0.iter()
            .map(|&x| {
                let e: f64 = rng.sample(StandardNormal);
                k.mean_scale * x + k.std * e
            })
            .collect()
    };
    let xr = perturb(real, rng);
    let xf = perturb(fake, rng);
    let lambda = weighting.eval(spec, t)?;

    let mut loss = 0.0;
    for (x, is_real) in [(&xr, true), (&xf, false)] {
        match eval {
            DiscEval::Fn(f) => {
                let d = f(x, t).clamp(trunc, 1.0 - trunc);
                loss += lambda * if is_real { -d.ln() } else { -(1.0 - d).ln() };
            }
            DiscEval::Net(params, grads) => {
                let (out, trace) = params.forward_raw(x, t);
                let d = sigmoid(out[0]);
                let clamped = d.clamp(trunc, 1.0 - trunc);
                loss += lambda * if is_real { -clamped.ln() } else { -(1.0 - clamped).ln() };
                // Truncation flattens the loss, so clamped samples send no
                // gradient.
                let gz = if d < trunc || d > 1.0 - trunc {
                    0.0
                } else if is_real {
                    lambda * (d - 1.0)
                } else {
                    lambda * d
                };
                if gz != 0.0 {
                    params.backward(&trace, &[gz], Some(grads));
                }
            }
        }
    }
    Ok(loss)
}

/// Monte-Carlo BCE of an arbitrary time-conditioned classifier over
/// perturbed real and fake batches with shared time sampling.
#[allow(clippy::too_many_arguments)]
pub fn disc_loss_with<R: Rng + ?Sized>(
    disc: &dyn Fn(&[f64], f64) -> f64,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    spec: &ScheduleSpec,
    weighting: Weighting,
    t_eps: f64,
    trunc: f64,
    rng: &mut R,
) -> Result<f64> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::Usage("empty batch".into()));
    }
    let n = real.len().min(fake.len());
    let mut eval = DiscEval::Fn(disc);
    let mut acc = 0.0;
    for i in 0..n {
        acc += disc_pair_term(&mut eval, &real[i], &fake[i], spec, weighting, t_eps, trunc, rng)?;
    }
    Ok((spec.t_max - t_eps) * acc / n as f64)
}

/// BCE of a discriminator network.
#[allow(clippy::too_many_arguments)]
pub fn disc_loss<R: Rng + ?Sized>(
    params: &NetParams,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    spec: &ScheduleSpec,
    weighting: Weighting,
    t_eps: f64,
    trunc: f64,
    rng: &mut R,
) -> Result<f64> {
    if params.arch.head != HeadKind::Discriminator {
        return Err(Error::Usage("disc_loss needs a discriminator head".into()));
    }
    let f = |x: &[f64], t: f64| params.forward_disc(x, t).expect("dims checked");
    disc_loss_with(&f, real, fake, spec, weighting, t_eps, trunc, rng)
}

struct Adam {
    m: GradBuf,
    v: GradBuf,
    step: usize,
}

impl Adam {
    fn new(params: &NetParams) -> Self {
        Adam { m: GradBuf::zeros_like(params), v: GradBuf::zeros_like(params), step: 0 }
    }

    fn update(&mut self, params: &mut NetParams, grads: &GradBuf, cfg: &TrainConfig, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for l in 0..params.layers.len() {
            let apply = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                for i in 0..theta.len() {
                    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    theta[i] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
                }
            };
            apply(&mut params.layers[l].w, &grads.w[l], &mut self.m.w[l], &mut self.v.w[l]);
            apply(&mut params.layers[l].b, &grads.b[l], &mut self.m.b[l], &mut self.v.b[l]);
        }
    }
}

/// Trained parameters plus the per-step loss curve.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub params: NetParams,
    pub loss_curve: Vec<(usize, f64)>,
}

fn check_finite(loss: f64, step: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Training { step, msg: format!("loss became {loss}") });
    }
    Ok(())
}

/// Denoising score matching: fit a score network to `data` under `spec`.
/// Deterministic per `(config, data, spec, architecture)`.
pub fn train_score(
    cfg: &TrainConfig,
    data: &DataSource,
    spec: &ScheduleSpec,
    hidden: &[usize],
    time_embed: usize,
) -> Result<TrainRun> {
    cfg.validate()?;
    data.validate()?;
    let arch = crate::nets::Arch {
        data_dim: data.dim(),
        hidden: hidden.to_vec(),
        time_embed,
        head: HeadKind::Score,
    };
    let mut params = NetParams::init(arch, cfg.seed)?;
    let mut adam = Adam::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5c07e5eed);
    let mut curve = Vec::with_capacity(cfg.steps);
    let scale = (spec.t_max - cfg.t_eps) / cfg.batch as f64;

    for step in 0..cfg.steps {
        let batch = data.draw(cfg.batch, &mut rng);
        let mut grads = GradBuf::zeros_like(&params);
        let mut sum = 0.0;
        for x0 in &batch {
            let mut eval = ScoreEval::Net(&params, &mut grads);
            sum += score_sample_term(&mut eval, x0, spec, cfg.weighting, cfg.t_eps, &mut rng)?;
        }
        let loss = scale * sum;
        check_finite(loss, step)?;
        grads.scale(scale);
        let lr = cfg.lr * cfg.lr_schedule.factor(step, cfg.steps);
        adam.update(&mut params, &grads, cfg, lr);
        curve.push((step, loss));
    }
    Ok(TrainRun { params, loss_curve: curve })
}

/// Two-stage discriminator training: real samples against a frozen fake
/// source (pre-generated model samples). Deterministic per inputs.
pub fn train_disc(
    cfg: &TrainConfig,
    real: &DataSource,
    fake: &DataSource,
    spec: &ScheduleSpec,
    hidden: &[usize],
    time_embed: usize,
) -> Result<TrainRun> {
    cfg.validate()?;
    real.validate()?;
    fake.validate()?;
    if real.dim() != fake.dim() {
        return Err(Error::Shape { expected: real.dim(), got: fake.dim() });
    }
    let arch = crate::nets::Arch {
        data_dim: real.dim(),
        hidden: hidden.to_vec(),
        time_embed,
        head: HeadKind::Discriminator,
    };
    let mut params = NetParams::init(arch, cfg.seed)?;
    let mut adam = Adam::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd15c5eed);
    let mut curve = Vec::with_capacity(cfg.steps);
    let scale = (spec.t_max - cfg.t_eps) / cfg.batch as f64;

    for step in 0..cfg.steps {
        let real_batch = real.draw(cfg.batch, &mut rng);
        let fake_batch = fake.draw(cfg.batch, &mut rng);
        let mut grads = GradBuf::zeros_like(&params);
        let mut sum = 0.0;
        for (r, f) in real_batch.iter().zip(&fake_batch) {
            let mut eval = DiscEval::Net(&params, &mut grads);
            sum += disc_pair_term(
                &mut eval,
                r,
                f,
                spec,
                cfg.weighting,
                cfg.t_eps,
                cfg.truncation,
                &mut rng,
            )?;
        }
        let loss = scale * sum;
        check_finite(loss, step)?;
        grads.scale(scale);
        let lr = cfg.lr * cfg.lr_schedule.factor(step, cfg.steps);
        adam.update(&mut params, &grads, cfg, lr);
        curve.push((step, loss));
    }
    Ok(TrainRun { params, loss_curve: curve })
}
