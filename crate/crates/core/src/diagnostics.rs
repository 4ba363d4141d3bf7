//! Quantitative evaluation: empirical Wasserstein-1 distances, the
//! three-term sampling-error decomposition, log-density-ratio traces by
//! perturbation level, and quality-by-NFE sweeps.

use crate::error::{Error, Result};
use crate::nets::{log_odds_bound, NetParams, Weighting};
use crate::oracle::GaussianMixture;
use crate::sampler::{
    em_step, guided_drift, make_time_grid, prior_draw, sample, GridKind, GuidanceFn, SampleBatch,
    SamplerConfig, ScoreFn, Solver, Trajectory,
};
use crate::sde::ScheduleSpec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Exact empirical W1 in one dimension.
///
/// Equal sizes reduce to the mean absolute difference of the sorted samples;
/// unequal sizes integrate the gap between the two empirical CDFs over the
/// merged support, which matches quantile interpolation.
pub fn w1_exact_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Usage("empty sample set".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).expect("non-finite sample"));
    ys.sort_by(|u, v| u.partial_cmp(v).expect("non-finite sample"));
    if xs.len() == ys.len() {
        let n = xs.len() as f64;
        return Ok(xs.iter().zip(&ys).map(|(&u, &v)| (u - v).abs()).sum::<f64>() / n);
    }
    // Merged-support CDF walk.
    let na = xs.len() as f64;
    let nb = ys.len() as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut prev = xs[0].min(ys[0]);
    while i < xs.len() || j < ys.len() {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        let fa = i as f64 / na;
        let fb = j as f64 / nb;
        total += (fa - fb).abs() * (next - prev);
        prev = next;
        while i < xs.len() && xs[i] == next {
            i += 1;
        }
        while j < ys.len() && ys[j] == next {
            j += 1;
        }
    }
    Ok(total)
}

fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|&x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Per-projection 1D distances behind the sliced estimate.
pub fn w1_sliced_per_projection(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    n_proj: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Usage("empty sample set".into()));
    }
    let dim = a[0].len();
    if dim < 2 {
        return Err(Error::Usage("sliced W1 needs dimension >= 2".into()));
    }
    if n_proj == 0 {
        return Err(Error::Usage("need at least one projection".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_proj);
    for _ in 0..n_proj {
        let u = unit_vector(dim, &mut rng);
        let pa: Vec<f64> = a.iter().map(|p| dot(p, &u)).collect();
        let pb: Vec<f64> = b.iter().map(|p| dot(p, &u)).collect();
        out.push(w1_exact_1d(&pa, &pb)?);
    }
    Ok(out)
}

/// Sliced W1: average of exact 1D distances over seeded random projections.
pub fn w1_sliced(a: &[Vec<f64>], b: &[Vec<f64>], n_proj: usize, seed: u64) -> Result<f64> {
    let per = w1_sliced_per_projection(a, b, n_proj, seed)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// W1 between point clouds: exact in 1D, sliced otherwise.
pub fn w1_points(a: &[Vec<f64>], b: &[Vec<f64>], n_proj: usize, seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Usage("empty sample set".into()));
    }
    if a[0].len() == 1 {
        let xa: Vec<f64> = a.iter().map(|p| p[0]).collect();
        let xb: Vec<f64> = b.iter().map(|p| p[0]).collect();
        w1_exact_1d(&xa, &xb)
    } else {
        w1_sliced(a, b, n_proj, seed)
    }
}

/// The three-term sampling-error report.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// W1 between the perturbed data marginal at the horizon and the prior.
    pub e_pri: f64,
    /// `sqrt(int lambda(t) E ||s - grad log p_t||^2 dt)` by Monte-Carlo
    /// against the analytic score.
    pub e_est: f64,
    /// Self-Richardson solver error: W1 between endpoints at N and 4N steps
    /// driven by a shared Brownian path.
    pub e_sol: f64,
    /// Endpoint W1 between sampler output and data samples.
    pub w1_total: f64,
}

impl ErrorReport {
    /// Flat `key=value` block for machine diffing.
    pub fn to_kv_block(&self) -> String {
        format!(
            "e_pri={}\ne_est={}\ne_sol={}\nw1_total={}\n",
            crate::csvio::fmt_f64(self.e_pri),
            crate::csvio::fmt_f64(self.e_est),
            crate::csvio::fmt_f64(self.e_sol),
            crate::csvio::fmt_f64(self.w1_total)
        )
    }
}

/// Knobs for [`error_decomposition`].
#[derive(Debug, Clone)]
pub struct DecompOptions {
    /// Samples per Monte-Carlo estimate.
    pub n: usize,
    /// Coarse step count for the solver-error probe and the endpoint run.
    pub nfe: usize,
    pub seed: u64,
    /// Draw the prior from the exact perturbed marginal instead of the
    /// solver prior (removes the prior-mismatch cause).
    pub exact_prior: bool,
    pub weighting: Weighting,
    pub t_eps: f64,
    pub n_proj: usize,
}

impl Default for DecompOptions {
    fn default() -> Self {
        DecompOptions {
            n: 4000,
            nfe: 128,
            seed: 42,
            exact_prior: false,
            weighting: Weighting::GSquared,
            t_eps: 1e-3,
            n_proj: 64,
        }
    }
}

/// Euler-Maruyama endpoints at N and 4N steps sharing one Brownian path per
/// chain: each coarse increment is the rescaled sum of its four fine
/// increments.
fn coupled_solver_endpoints(
    spec: &ScheduleSpec,
    dim: usize,
    score: ScoreFn<'_>,
    guidance: Option<GuidanceFn<'_>>,
    weight: f64,
    nfe: usize,
    n: usize,
    t_eps: f64,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let coarse = make_time_grid(spec, nfe, GridKind::Uniform, t_eps)?;
    let fine = make_time_grid(spec, nfe * 4, GridKind::Uniform, t_eps)?;
    let mut coarse_pts = Vec::with_capacity(n);
    let mut fine_pts = Vec::with_capacity(n);
    let drift = |xv: &[f64], tv: f64| {
        guided_drift(xv, tv, score, guidance, weight, spec).expect("grid in domain")
    };
    for chain in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(chain as u64));
        let x0 = prior_draw(spec, dim, &mut rng)?;
        // Brownian increments per fine step.
        let mut dw = Vec::with_capacity(nfe * 4);
        for k in 0..nfe * 4 {
            let dt = fine[k] - fine[k + 1];
            let step: Vec<f64> = (0..dim)
                .map(|_| {
                    let e: f64 = rng.sample(StandardNormal);
                    dt.sqrt() * e
                })
                .collect();
            dw.push(step);
        }
        let mut xf = x0.clone();
        for k in 0..nfe * 4 {
            let dt = fine[k] - fine[k + 1];
            let noise: Vec<f64> = dw[k].iter().map(|&w| w / dt.sqrt()).collect();
            xf = em_step(&xf, fine[k], fine[k + 1], &drift, spec, &noise)?;
        }
        let mut xc = x0;
        for k in 0..nfe {
            let dt = coarse[k] - coarse[k + 1];
            let mut agg = vec![0.0; dim];
            for sub in 0..4 {
                for (acc, &w) in agg.iter_mut().zip(&dw[4 * k + sub]) {
                    *acc += w;
                }
            }
            let noise: Vec<f64> = agg.iter().map(|&w| w / dt.sqrt()).collect();
            xc = em_step(&xc, coarse[k], coarse[k + 1], &drift, spec, &noise)?;
        }
        fine_pts.push(xf);
        coarse_pts.push(xc);
    }
    Ok((coarse_pts, fine_pts))
}

/// Split the bound `W1 <= E_pri + E_est + E_sol` into measured terms for a
/// score source against an analytic data mixture.
pub fn error_decomposition(
    spec: &ScheduleSpec,
    score: ScoreFn<'_>,
    guidance: Option<GuidanceFn<'_>>,
    guidance_weight: f64,
    data: &GaussianMixture,
    opts: &DecompOptions,
) -> Result<ErrorReport> {
    let dim = data.dim();

    // Prior mismatch: exact marginal at the horizon vs the solver prior.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37);
    let horizon = data.perturbed(spec, spec.t_max)?;
    let marginal = horizon.sample_n(opts.n, &mut rng);
    let prior: Vec<Vec<f64>> = if opts.exact_prior {
        horizon.sample_n(opts.n, &mut rng)
    } else {
        (0..opts.n)
            .map(|_| prior_draw(spec, dim, &mut rng))
            .collect::<Result<_>>()?
    };
    let e_pri = w1_points(&marginal, &prior, opts.n_proj, opts.seed ^ 0x11)?;

    // Score estimation error against the analytic perturbed score.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xe57);
    let mut acc = 0.0;
    for _ in 0..opts.n {
        let t = rng.random_range(opts.t_eps..spec.t_max);
        let x0 = data.sample(&mut rng);
        let noise: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let xt = spec.perturb(&x0, t, &noise)?;
        let truth = data.perturbed(spec, t)?.score(&xt)?;
        let est = score(&xt, t);
        let lambda = opts.weighting.eval(spec, t)?;
        acc += lambda
            * est
                .iter()
                .zip(&truth)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<f64>();
    }
    let e_est = ((spec.t_max - opts.t_eps) * acc / opts.n as f64).sqrt();

    // Solver error: endpoints at N vs 4N steps under one Brownian path.
    let (coarse, fine) = coupled_solver_endpoints(
        spec,
        dim,
        score,
        guidance,
        guidance_weight,
        opts.nfe,
        opts.n,
        opts.t_eps,
        opts.seed ^ 0x501,
    )?;
    let e_sol = w1_points(&coarse, &fine, opts.n_proj, opts.seed ^ 0x22)?;

    // Endpoint gap to the data distribution.
    let cfg = SamplerConfig {
        solver: Solver::EulerMaruyama,
        nfe: opts.nfe,
        grid: GridKind::Uniform,
        guidance_weight,
        t_eps: opts.t_eps,
        seed: opts.seed ^ 0xf17a,
        ..SamplerConfig::default()
    };
    let batch = sample(&cfg, spec, dim, opts.n, score, guidance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xda7a);
    let reference = data.sample_n(opts.n, &mut rng);
    let w1_total = w1_points(&batch.points, &reference, opts.n_proj, opts.seed ^ 0x33)?;

    Ok(ErrorReport { e_pri, e_est, e_sol, w1_total })
}

/// Weighted relative L2 score error against the analytic perturbed score
/// over a time grid:
/// `sqrt( sum_t lambda(t) E||s - s*||^2 / sum_t lambda(t) E||s*||^2 )`
/// with the expectation over `x ~ p_t` by Monte-Carlo. The same temporal
/// weight normalizes numerator and denominator, mirroring the estimation
/// term of the error decomposition.
pub fn score_relative_l2(
    score: ScoreFn<'_>,
    data: &GaussianMixture,
    spec: &ScheduleSpec,
    weighting: Weighting,
    t_grid: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if t_grid.is_empty() || n_mc == 0 {
        return Err(Error::Usage("need a time grid and samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut num = 0.0;
    let mut den = 0.0;
    for &t in t_grid {
        let marginal = data.perturbed(spec, t)?;
        let lambda = weighting.eval(spec, t)?;
        for _ in 0..n_mc {
            let x = marginal.sample(&mut rng);
            let truth = marginal.score(&x)?;
            let est = score(&x, t);
            num += lambda
                * est
                    .iter()
                    .zip(&truth)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<f64>();
            den += lambda * truth.iter().map(|&v| v * v).sum::<f64>();
        }
    }
    Ok((num / den).sqrt())
}

/// Aggregated log-density-ratio statistics per noise-level bin.
#[derive(Debug, Clone)]
pub struct RatioTrace {
    pub label: String,
    /// Bin centers (kernel std).
    pub sigma: Vec<f64>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
    pub count: Vec<usize>,
}

impl RatioTrace {
    /// Integrated absolute gap between two traces over bins populated in
    /// both, using the mean curve.
    pub fn integrated_gap(&self, other: &RatioTrace) -> f64 {
        let mut total = 0.0;
        for i in 0..self.sigma.len().min(other.sigma.len()) {
            if self.count[i] > 0 && other.count[i] > 0 {
                total += (self.mean[i] - other.mean[i]).abs();
            }
        }
        total
    }
}

/// Log-spaced bin edges and centers over `[lo, hi]`.
fn log_bins(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let edges: Vec<f64> = (0..=n)
        .map(|i| (llo + (lhi - llo) * i as f64 / n as f64).exp())
        .collect();
    let centers = edges.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
    (edges, centers)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = q * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * (idx - lo as f64)
    }
}

fn aggregate_bins(
    label: &str,
    centers: Vec<f64>,
    mut per_bin: Vec<Vec<f64>>,
) -> RatioTrace {
    let n = centers.len();
    let mut mean = vec![0.0; n];
    let mut median = vec![0.0; n];
    let mut q10 = vec![0.0; n];
    let mut q90 = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (i, vals) in per_bin.iter_mut().enumerate() {
        count[i] = vals.len();
        if vals.is_empty() {
            continue;
        }
        vals.sort_by(|a, b| a.partial_cmp(b).expect("non-finite ratio"));
        mean[i] = vals.iter().sum::<f64>() / vals.len() as f64;
        median[i] = quantile(vals, 0.5);
        q10[i] = quantile(vals, 0.1);
        q90[i] = quantile(vals, 0.9);
    }
    RatioTrace { label: label.into(), sigma: centers, mean, median, q10, q90, count }
}

/// Ratio source backed by a trained discriminator: truncated log odds.
pub fn ratio_from_disc(params: &NetParams, trunc: f64) -> impl Fn(&[f64], f64) -> f64 {
    let params = params.clone();
    move |x: &[f64], t: f64| params.log_odds(x, t, trunc).expect("dims fixed by caller")
}

/// Ratio source backed by two analytic mixtures perturbed to `t`; clamped
/// to the discriminator's truncation band so both sources share bounds.
pub fn ratio_from_mixture_pair(
    p: &GaussianMixture,
    q: &GaussianMixture,
    spec: &ScheduleSpec,
    trunc: f64,
) -> impl Fn(&[f64], f64) -> f64 {
    let p = p.clone();
    let q = q.clone();
    let spec = spec.clone();
    let bound = log_odds_bound(trunc);
    move |x: &[f64], t: f64| {
        let pt = p.perturbed(&spec, t).expect("valid t");
        let qt = q.perturbed(&spec, t).expect("valid t");
        let lr = pt.log_density(x).expect("dim checked") - qt.log_density(x).expect("dim checked");
        lr.clamp(-bound, bound)
    }
}

/// Evaluate a log-ratio source along recorded trajectories and aggregate
/// per noise-level bin.
pub fn trace_log_ratio(
    trajectories: &[Trajectory],
    spec: &ScheduleSpec,
    ratio: &dyn Fn(&[f64], f64) -> f64,
    n_bins: usize,
    label: &str,
) -> Result<RatioTrace> {
    if trajectories.is_empty() || trajectories.iter().all(|t| t.points.is_empty()) {
        return Err(Error::Usage("empty trajectories".into()));
    }
    let t_lo = trajectories
        .iter()
        .flat_map(|tr| tr.points.iter().map(|p| p.t))
        .fold(f64::INFINITY, f64::min);
    let s_lo = spec.kernel_std(t_lo)?.max(1e-12);
    let s_hi = spec.kernel_std(spec.t_max)?;
    let (edges, centers) = log_bins(s_lo, s_hi, n_bins);
    let mut per_bin = vec![Vec::new(); n_bins];
    for tr in trajectories {
        for p in &tr.points {
            let sigma = spec.kernel_std(p.t)?;
            let idx = edges.partition_point(|&e| e < sigma).saturating_sub(1).min(n_bins - 1);
            let value = p.log_ratio.unwrap_or_else(|| ratio(&p.x, p.t));
            per_bin[idx].push(value);
        }
    }
    Ok(aggregate_bins(label, centers, per_bin))
}

/// Reference trace: real samples perturbed onto the same noise-level grid.
#[allow(clippy::too_many_arguments)]
pub fn data_forward_trace(
    data: &GaussianMixture,
    spec: &ScheduleSpec,
    ratio: &dyn Fn(&[f64], f64) -> f64,
    n_bins: usize,
    n_per_bin: usize,
    t_eps: f64,
    seed: u64,
    label: &str,
) -> Result<RatioTrace> {
    let s_lo = spec.kernel_std(t_eps)?.max(1e-12);
    let s_hi = spec.kernel_std(spec.t_max)?;
    let (_, centers) = log_bins(s_lo, s_hi, n_bins);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_bin = Vec::with_capacity(n_bins);
    for &sigma in &centers {
        let t = spec.time_for_std(sigma)?;
        let mut vals = Vec::with_capacity(n_per_bin);
        for _ in 0..n_per_bin {
            let x0 = data.sample(&mut rng);
            let noise: Vec<f64> = (0..data.dim()).map(|_| rng.sample(StandardNormal)).collect();
            let xt = spec.perturb(&x0, t, &noise)?;
            vals.push(ratio(&xt, t));
        }
        per_bin.push(vals);
    }
    Ok(aggregate_bins(label, centers, per_bin))
}

/// One row of the quality-by-NFE table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub nfe: usize,
    pub w1_unguided: f64,
    pub w1_guided: f64,
}

/// Endpoint W1 against reference data for unguided and guided samplers at
/// each NFE, with paired seeds.
#[allow(clippy::too_many_arguments)]
pub fn nfe_sweep(
    spec: &ScheduleSpec,
    dim: usize,
    score: ScoreFn<'_>,
    guidance: GuidanceFn<'_>,
    base: &SamplerConfig,
    nfes: &[usize],
    n_per: usize,
    reference: &[Vec<f64>],
) -> Result<Vec<SweepRow>> {
    if nfes.is_empty() {
        return Err(Error::Usage("empty NFE list".into()));
    }
    let mut rows = Vec::with_capacity(nfes.len());
    for &nfe in nfes {
        let cfg = SamplerConfig { nfe, record_trajectories: false, ..base.clone() };
        let unguided: SampleBatch = sample(&cfg, spec, dim, n_per, score, None)?;
        let guided: SampleBatch = sample(&cfg, spec, dim, n_per, score, Some(guidance))?;
        let w1_u = w1_points(&unguided.points, reference, 64, cfg.seed ^ nfe as u64)?;
        let w1_g = w1_points(&guided.points, reference, 64, cfg.seed ^ nfe as u64)?;
        rows.push(SweepRow { nfe, w1_unguided: w1_u, w1_guided: w1_g });
    }
    Ok(rows)
}
