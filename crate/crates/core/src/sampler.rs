//! Generative processes: the reverse SDE, the probability-flow ODE with a
//! Heun correction, the stochastic-churn sampler, and rejection sampling.
//! Score and guidance sources are pluggable closures, so the same solvers
//! run from trained networks or from analytic oracles.

use crate::error::{Error, Result};
use crate::nets::NetParams;
use crate::sde::ScheduleSpec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A score source: `(x, t) -> grad log p_t(x)` estimate.
pub type ScoreFn<'a> = &'a dyn Fn(&[f64], f64) -> Vec<f64>;
/// A guidance source: `(x, t) -> grad log(p_real_t / p_model_t)` estimate.
pub type GuidanceFn<'a> = &'a dyn Fn(&[f64], f64) -> Vec<f64>;

/// Numerical solver choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Euler-Maruyama on the full reverse SDE (guidance enters with the
    /// whole `g^2` coefficient).
    EulerMaruyama,
    /// Second-order Heun on the probability-flow ODE (deterministic).
    PfOdeHeun,
    /// The churn sampler: noise re-injection followed by a single-evaluation
    /// Euler update on the half-`g^2` drift, guidance entering with the
    /// `-1/2 g^2` coefficient.
    ChurnAlg1,
}

/// Time-grid construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Noise levels follow the rho-warped spacing (kernel std to the power
    /// `1/rho` is linear in the step index), mapped back to times.
    RhoWarped,
    /// Uniform in `t`.
    Uniform,
}

/// Per-step churn parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnParams {
    /// Total churn budget; the per-step churn is
    /// `min(sqrt(2) - 1, total / n_steps)` and zero when the budget is zero.
    pub total: f64,
    /// Inflation factor on the re-injected noise.
    pub s_noise: f64,
    /// Churn applies only where the kernel std lies in this band.
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl Default for ChurnParams {
    fn default() -> Self {
        ChurnParams { total: 0.0, s_noise: 1.0, sigma_lo: 0.05, sigma_hi: 50.0 }
    }
}

/// Sampler configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub solver: Solver,
    /// Score-evaluation budget. Euler and churn use one evaluation per step;
    /// Heun uses `2 n_steps - 1` (the final step stays first-order), so odd
    /// budgets are met exactly.
    pub nfe: usize,
    pub grid: GridKind,
    pub churn: ChurnParams,
    pub guidance_weight: f64,
    /// Lower end of the integration interval.
    pub t_eps: f64,
    pub seed: u64,
    pub record_trajectories: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            solver: Solver::ChurnAlg1,
            nfe: 64,
            grid: GridKind::RhoWarped,
            churn: ChurnParams::default(),
            guidance_weight: 1.0,
            t_eps: 1e-3,
            seed: 42,
            record_trajectories: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, spec: &ScheduleSpec) -> Result<()> {
        if self.nfe == 0 {
            return Err(Error::Usage("nfe must be positive".into()));
        }
        if !(self.t_eps >= 0.0 && self.t_eps < spec.t_max) {
            return Err(Error::Domain(format!(
                "t_eps {} outside [0, t_max)",
                self.t_eps
            )));
        }
        if self.churn.total < 0.0 {
            return Err(Error::Domain("churn budget must be >= 0".into()));
        }
        if !(self.churn.s_noise > 0.0) {
            return Err(Error::Domain("s_noise must be positive".into()));
        }
        Ok(())
    }

    /// Number of solver steps implied by the NFE budget.
    pub fn n_steps(&self) -> usize {
        match self.solver {
            Solver::EulerMaruyama | Solver::ChurnAlg1 => self.nfe,
            Solver::PfOdeHeun => (self.nfe + 1) / 2,
        }
    }
}

/// One record along a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub log_ratio: Option<f64>,
}

/// Per-chain sequence of states at strictly decreasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub chain_id: usize,
    pub points: Vec<TrajPoint>,
}

/// Final states plus optional trajectories and acceptance flags.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub points: Vec<Vec<f64>>,
    pub trajectories: Option<Vec<Trajectory>>,
    /// Set by rejection sampling, aligned with `points`.
    pub accepted: Option<Vec<bool>>,
    pub score_evals_per_chain: usize,
}

impl SampleBatch {
    /// Points that passed the acceptance mask (all points when no mask).
    pub fn accepted_points(&self) -> Vec<Vec<f64>> {
        match &self.accepted {
            None => self.points.clone(),
            Some(mask) => self
                .points
                .iter()
                .zip(mask)
                .filter(|(_, &ok)| ok)
                .map(|(p, _)| p.clone())
                .collect(),
        }
    }
}

/// Decreasing time grid `t_N .. t_0` with `t_N = t_max`, `t_0 = t_eps`,
/// length `n_steps + 1`.
pub fn make_time_grid(
    spec: &ScheduleSpec,
    n_steps: usize,
    kind: GridKind,
    t_eps: f64,
) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(Error::Usage("need at least one step".into()));
    }
    if !(t_eps >= 0.0 && t_eps < spec.t_max) {
        return Err(Error::Domain(format!("t_eps {t_eps} outside [0, t_max)")));
    }
    let mut grid = Vec::with_capacity(n_steps + 1);
    match kind {
        GridKind::Uniform => {
            for i in 0..=n_steps {
                let frac = i as f64 / n_steps as f64;
                grid.push(spec.t_max + frac * (t_eps - spec.t_max));
            }
            grid[0] = spec.t_max;
            grid[n_steps] = t_eps;
        }
        GridKind::RhoWarped => {
            let s_hi = spec.kernel_std(spec.t_max)?;
            let s_lo = spec.kernel_std(t_eps)?.max(1e-12);
            let inv_rho = 1.0 / spec.rho;
            let a = s_hi.powf(inv_rho);
            let b = s_lo.powf(inv_rho) - a;
            for i in 0..=n_steps {
                let frac = i as f64 / n_steps as f64;
                let sigma = (a + frac * b).powf(spec.rho);
                grid.push(spec.time_for_std(sigma)?);
            }
            grid[0] = spec.t_max;
            grid[n_steps] = t_eps;
        }
    }
    for w in grid.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Domain(format!(
                "time grid not strictly decreasing at {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(grid)
}

/// Reverse-SDE drift with the score plugged in:
/// `-1/2 beta_t x - g_t^2 s(x, t)`, integrated with decreasing `t`.
pub fn generative_drift(
    x: &[f64],
    t: f64,
    score: ScoreFn<'_>,
    spec: &ScheduleSpec,
) -> Result<Vec<f64>> {
    let (beta, g, _) = spec.eval(t)?;
    let g2 = g * g;
    let s = score(x, t);
    if s.len() != x.len() {
        return Err(Error::Shape { expected: x.len(), got: s.len() });
    }
    Ok(x.iter()
        .zip(&s)
        .map(|(&xi, &si)| -0.5 * beta * xi - g2 * si)
        .collect())
}

/// Adjusted reverse-SDE drift:
/// `-1/2 beta_t x - g_t^2 (s(x, t) + weight * guidance(x, t))`.
pub fn guided_drift(
    x: &[f64],
    t: f64,
    score: ScoreFn<'_>,
    guidance: Option<GuidanceFn<'_>>,
    weight: f64,
    spec: &ScheduleSpec,
) -> Result<Vec<f64>> {
    let (beta, g, _) = spec.eval(t)?;
    let g2 = g * g;
    let s = score(x, t);
    if s.len() != x.len() {
        return Err(Error::Shape { expected: x.len(), got: s.len() });
    }
    let corr = match guidance {
        Some(gf) => {
            let c = gf(x, t);
            if c.len() != x.len() {
                return Err(Error::Shape { expected: x.len(), got: c.len() });
            }
            Some(c)
        }
        None => None,
    };
    Ok(x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let adj = match &corr {
                Some(c) => s[i] + weight * c[i],
                None => s[i],
            };
            -0.5 * beta * xi - g2 * adj
        })
        .collect())
}

/// Probability-flow drift: `-1/2 beta_t x - 1/2 g_t^2 (s + weight * guidance)`.
pub fn pf_flow_drift(
    x: &[f64],
    t: f64,
    score: ScoreFn<'_>,
    guidance: Option<GuidanceFn<'_>>,
    weight: f64,
    spec: &ScheduleSpec,
) -> Result<Vec<f64>> {
    let (beta, g, _) = spec.eval(t)?;
    let half_g2 = 0.5 * g * g;
    let s = score(x, t);
    if s.len() != x.len() {
        return Err(Error::Shape { expected: x.len(), got: s.len() });
    }
    let corr = guidance.map(|gf| gf(x, t));
    Ok(x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let adj = match &corr {
                Some(c) => s[i] + weight * c[i],
                None => s[i],
            };
            -0.5 * beta * xi - half_g2 * adj
        })
        .collect())
}

/// Input-gradient of the truncated discriminator log odds,
/// `grad_x log(d / (1 - d))`; the solver applies its own `g^2` coefficient.
pub fn guidance_from_discriminator(
    params: &NetParams,
    x: &[f64],
    t: f64,
    trunc: f64,
) -> Result<Vec<f64>> {
    params.log_odds_input_grad(x, t, trunc)
}

/// One Euler-Maruyama step from `t_from` down to `t_to`:
/// `x + (t_to - t_from) drift(x, t_from) + g(t_from) sqrt(t_from - t_to) noise`.
pub fn em_step(
    x: &[f64],
    t_from: f64,
    t_to: f64,
    drift: &dyn Fn(&[f64], f64) -> Vec<f64>,
    spec: &ScheduleSpec,
    noise: &[f64],
) -> Result<Vec<f64>> {
    if t_to >= t_from {
        return Err(Error::Usage(format!(
            "em_step needs decreasing times, got {t_from} -> {t_to}"
        )));
    }
    if noise.len() != x.len() {
        return Err(Error::Shape { expected: x.len(), got: noise.len() });
    }
    let (_, g, _) = spec.eval(t_from)?;
    let dt = t_to - t_from;
    let root = (t_from - t_to).sqrt();
    let d = drift(x, t_from);
    if d.len() != x.len() {
        return Err(Error::Shape { expected: x.len(), got: d.len() });
    }
    Ok(x.iter()
        .zip(d.iter().zip(noise))
        .map(|(&xi, (&di, &ei))| xi + dt * di + g * root * ei)
        .collect())
}

/// Per-step churn amount for position `k` on a grid with `n_steps` steps.
fn churn_gamma(
    spec: &ScheduleSpec,
    churn: &ChurnParams,
    t: f64,
    n_steps: usize,
) -> Result<f64> {
    if churn.total == 0.0 {
        return Ok(0.0);
    }
    let sigma = spec.kernel_std(t)?;
    if sigma < churn.sigma_lo || sigma > churn.sigma_hi {
        return Ok(0.0);
    }
    Ok((churn.total / n_steps as f64).min(std::f64::consts::SQRT_2 - 1.0))
}

/// Churn step with the noise draw supplied by the caller; `eps` must be
/// standard normal, the `s_noise` inflation is applied here.
#[allow(clippy::too_many_arguments)]
pub fn churn_step_with_noise(
    x: &[f64],
    k: usize,
    grid: &[f64],
    score: ScoreFn<'_>,
    guidance: Option<GuidanceFn<'_>>,
    weight: f64,
    churn: &ChurnParams,
    spec: &ScheduleSpec,
    eps: &[f64],
) -> Result<Vec<f64>> {
    if k + 1 >= grid.len() {
        return Err(Error::Usage(format!(
            "step index {k} out of range for grid of {} nodes",
            grid.len()
        )));
    }
    if eps.len() != x.len() {
        return Err(Error::Shape { expected: x.len(), got: eps.len() });
    }
    let t_i = grid[k];
    let t_next = grid[k + 1];
    if t_next >= t_i {
        return Err(Error::Usage("grid must be strictly decreasing".into()));
    }
    let gamma = churn_gamma(spec, churn, t_i, grid.len() - 1)?;
    if gamma < 0.0 {
        return Err(Error::Domain(format!("negative churn {gamma}")));
    }
    // Raise the time from t_i to t_hat; capped at the horizon so the
    // schedule stays in domain.
    let t_hat = (t_i + gamma * t_i).min(spec.t_max);
    let bump = (t_hat * t_hat - t_i * t_i).max(0.0).sqrt();
    let x_hat: Vec<f64> = x
        .iter()
        .zip(eps)
        .map(|(&xi, &ei)| xi + bump * churn.s_noise * ei)
        .collect();

    let (beta, g, _) = spec.eval(t_hat)?;
    let half_g2 = 0.5 * g * g;
    let s = score(&x_hat, t_hat);
    if s.len() != x.len() {
        return Err(Error::Shape { expected: x.len(), got: s.len() });
    }
    let corr = guidance.map(|gf| gf(&x_hat, t_hat));
    let dt = t_next - t_hat;
    Ok(x_hat
        .iter()
        .enumerate()
        .map(|(i, &xh)| {
            let d = -0.5 * beta * xh - half_g2 * s[i];
            let step = match &corr {
                Some(c) => d + (-half_g2 * weight * c[i]),
                None => d,
            };
            xh + dt * step
        })
        .collect())
}

/// Deterministic probability-flow run over a decreasing grid with the Heun
/// corrector; the final step stays first-order so the evaluation count is
/// `2 n_steps - 1`.
pub fn heun_flow(
    x0: &[f64],
    grid: &[f64],
    score: ScoreFn<'_>,
    guidance: Option<GuidanceFn<'_>>,
    weight: f64,
    spec: &ScheduleSpec,
) -> Result<Vec<f64>> {
    if grid.len() < 2 {
        return Err(Error::Usage("grid needs at least two nodes".into()));
    }
    let n_steps = grid.len() - 1;
    let mut x = x0.to_vec();
    for k in 0..n_steps {
        let (t0, t1) = (grid[k], grid[k + 1]);
        if t1 >= t0 {
            return Err(Error::Usage("grid must be strictly decreasing".into()));
        }
        let dt = t1 - t0;
        let d1 = pf_flow_drift(&x, t0, score, guidance, weight, spec)?;
        let pred: Vec<f64> = x.iter().zip(&d1).map(|(&xi, &di)| xi + dt * di).collect();
        x = if k + 1 < n_steps {
            let d2 = pf_flow_drift(&pred, t1, score, guidance, weight, spec)?;
            x.iter()
                .zip(d1.iter().zip(&d2))
                .map(|(&xi, (&a, &b))| xi + dt * 0.5 * (a + b))
                .collect()
        } else {
            pred
        };
    }
    Ok(x)
}

/// Churn step drawing its own noise from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn churn_step<R: Rng + ?Sized>(
    x: &[f64],
    k: usize,
    grid: &[f64],
    score: ScoreFn<'_>,
    guidance: Option<GuidanceFn<'_>>,
    weight: f64,
    churn: &ChurnParams,
    spec: &ScheduleSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let eps: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
    churn_step_with_noise(x, k, grid, score, guidance, weight, churn, spec, &eps)
}

/// Draw from the sampler prior: `N(0, I)` for VP, `N(0, sigma(t_max)^2 I)`
/// for VE.
pub fn prior_draw<R: Rng + ?Sized>(
    spec: &ScheduleSpec,
    dim: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let scale = if spec.family.is_vp() {
        1.0
    } else {
        spec.kernel_std(spec.t_max)?
    };
    Ok((0..dim)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            scale * e
        })
        .collect())
}

struct EvalCounter<'a> {
    inner: ScoreFn<'a>,
    count: std::cell::Cell<usize>,
}

impl<'a> EvalCounter<'a> {
    fn call(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.count.set(self.count.get() + 1);
        (self.inner)(x, t)
    }
}

/// Run `n` independent chains of the configured solver from the prior.
/// Deterministic per `(config, seed)`; chain `i` uses the stream seeded with
/// `seed + i`.
pub fn sample(
    cfg: &SamplerConfig,
    spec: &ScheduleSpec,
    dim: usize,
    n: usize,
    score: ScoreFn<'_>,
    guidance: Option<GuidanceFn<'_>>,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::Usage("need at least one chain".into()));
    }
    cfg.validate(spec)?;
    let n_steps = cfg.n_steps();
    let grid = make_time_grid(spec, n_steps, cfg.grid, cfg.t_eps)?;

    let counter = EvalCounter { inner: score, count: std::cell::Cell::new(0) };
    let counted = |x: &[f64], t: f64| counter.call(x, t);

    let mut points = Vec::with_capacity(n);
    let mut trajectories = cfg.record_trajectories.then(|| Vec::with_capacity(n));

    for chain in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(chain as u64));
        let mut x = prior_draw(spec, dim, &mut rng)?;
        let mut traj = cfg.record_trajectories.then(|| Trajectory {
            chain_id: chain,
            points: vec![TrajPoint { t: grid[0], x: x.clone(), log_ratio: None }],
        });

        match cfg.solver {
            Solver::EulerMaruyama => {
                for k in 0..n_steps {
                    let drift = |xv: &[f64], tv: f64| {
                        guided_drift(xv, tv, &counted, guidance, cfg.guidance_weight, spec)
                            .expect("grid times are in domain")
                    };
                    let noise: Vec<f64> =
                        (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    x = em_step(&x, grid[k], grid[k + 1], &drift, spec, &noise)?;
                    if let Some(tr) = traj.as_mut() {
                        tr.points.push(TrajPoint { t: grid[k + 1], x: x.clone(), log_ratio: None });
                    }
                }
            }
            Solver::PfOdeHeun => {
                for k in 0..n_steps {
                    let (t0, t1) = (grid[k], grid[k + 1]);
                    let dt = t1 - t0;
                    let d1 =
                        pf_flow_drift(&x, t0, &counted, guidance, cfg.guidance_weight, spec)?;
                    let pred: Vec<f64> =
                        x.iter().zip(&d1).map(|(&xi, &di)| xi + dt * di).collect();
                    x = if k + 1 < n_steps {
                        let d2 = pf_flow_drift(
                            &pred,
                            t1,
                            &counted,
                            guidance,
                            cfg.guidance_weight,
                            spec,
                        )?;
                        x.iter()
                            .zip(d1.iter().zip(&d2))
                            .map(|(&xi, (&a, &b))| xi + dt * 0.5 * (a + b))
                            .collect()
                    } else {
                        pred
                    };
                    if let Some(tr) = traj.as_mut() {
                        tr.points.push(TrajPoint { t: t1, x: x.clone(), log_ratio: None });
                    }
                }
            }
            Solver::ChurnAlg1 => {
                for k in 0..n_steps {
                    x = churn_step(
                        &x,
                        k,
                        &grid,
                        &counted,
                        guidance,
                        cfg.guidance_weight,
                        &cfg.churn,
                        spec,
                        &mut rng,
                    )?;
                    if let Some(tr) = traj.as_mut() {
                        tr.points.push(TrajPoint { t: grid[k + 1], x: x.clone(), log_ratio: None });
                    }
                }
            }
        }

        points.push(x);
        if let (Some(list), Some(tr)) = (trajectories.as_mut(), traj) {
            list.push(tr);
        }
    }

    let total = counter.count.get();
    debug_assert_eq!(total % n, 0);
    Ok(SampleBatch {
        points,
        trajectories,
        accepted: None,
        score_evals_per_chain: total / n,
    })
}

/// Rejection sampling: run the configured sampler, keep points whose
/// `judge` value is at least `threshold` (0.5 corresponds to an estimated
/// density ratio of one; the boundary is accepted), until `n_accept` points
/// pass. Returns the attempted batch with its acceptance mask plus the
/// acceptance rate.
pub fn rejection_sample(
    cfg: &SamplerConfig,
    spec: &ScheduleSpec,
    dim: usize,
    score: ScoreFn<'_>,
    guidance: Option<GuidanceFn<'_>>,
    judge: &dyn Fn(&[f64]) -> f64,
    n_accept: usize,
    threshold: f64,
) -> Result<(SampleBatch, f64)> {
    if n_accept == 0 {
        return Err(Error::Usage("need at least one accepted sample".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Domain(format!("threshold {threshold} outside (0, 1)")));
    }
    const STARVATION_ATTEMPTS: usize = 10_000;
    const STARVATION_RATE: f64 = 0.01;

    let mut points = Vec::new();
    let mut mask = Vec::new();
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    let mut evals = 0usize;
    let chunk = n_accept.clamp(64, 4096);

    while accepted < n_accept {
        let sub = SamplerConfig {
            seed: cfg.seed.wrapping_add(attempts as u64),
            record_trajectories: false,
            ..cfg.clone()
        };
        let batch = sample(&sub, spec, dim, chunk, score, guidance)?;
        evals = batch.score_evals_per_chain;
        for p in batch.points {
            let ok = judge(&p) >= threshold;
            if ok {
                accepted += 1;
            }
            mask.push(ok);
            points.push(p);
            attempts += 1;
        }
        if attempts >= STARVATION_ATTEMPTS
            && (accepted as f64) < STARVATION_RATE * attempts as f64
        {
            return Err(Error::Starvation { attempts, accepted });
        }
    }
    let alpha = accepted as f64 / attempts as f64;
    Ok((
        SampleBatch {
            points,
            trajectories: None,
            accepted: Some(mask),
            score_evals_per_chain: evals,
        },
        alpha,
    ))
}
