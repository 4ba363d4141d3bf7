//! Closed-form ground truth on diagonal Gaussian mixtures: densities,
//! scores, perturbed marginals, exact density ratios, the optimal
//! discriminator and the marginal of a linear generative SDE.
//!
//! Mixtures are closed under the forward perturbation kernel, which makes
//! them the verification backbone for every other module.

use crate::error::{Error, Result};
use crate::sde::ScheduleSpec;
use rand::Rng;
use rand_distr::StandardNormal;

/// Log-densities below this are treated as negative infinity; the
/// discriminator sigmoid saturates instead of producing NaN.
const LOG_DENSITY_FLOOR: f64 = -700.0;

/// A weighted mixture of Gaussians with diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
    dim: usize,
}

impl GaussianMixture {
    /// Build a mixture, validating that weights sum to one (within 1e-12),
    /// variances are positive and all components share one dimension.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, vars: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != vars.len() {
            return Err(Error::Usage(format!(
                "component count mismatch: {} weights, {} means, {} variances",
                weights.len(),
                means.len(),
                vars.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {sum}, expected 1")));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Domain("negative mixture weight".into()));
        }
        let dim = means[0].len();
        for (mu, var) in means.iter().zip(&vars) {
            if mu.len() != dim {
                return Err(Error::Shape { expected: dim, got: mu.len() });
            }
            if var.len() != dim {
                return Err(Error::Shape { expected: dim, got: var.len() });
            }
            if var.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Domain("all variances must be positive".into()));
            }
        }
        Ok(GaussianMixture { weights, means, vars, dim })
    }

    /// Single isotropic Gaussian.
    pub fn gaussian(mean: Vec<f64>, var: f64) -> Result<Self> {
        let d = mean.len();
        GaussianMixture::new(vec![1.0], vec![mean], vec![vec![var; d]])
    }

    /// Two modes at +-2 with variance 0.25, equal weights.
    pub fn bimodal_1d() -> Self {
        GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![-2.0], vec![2.0]],
            vec![vec![0.25], vec![0.25]],
        )
        .expect("static parameters")
    }

    /// Eight modes on a radius-4 circle, variance 0.09.
    pub fn ring8() -> Self {
        let mut means = Vec::with_capacity(8);
        for k in 0..8 {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
            means.push(vec![4.0 * angle.cos(), 4.0 * angle.sin()]);
        }
        GaussianMixture::new(vec![0.125; 8], means, vec![vec![0.09, 0.09]; 8])
            .expect("static parameters")
    }

    /// Look up a built-in dataset by name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "bimodal-1d" => Some(Self::bimodal_1d()),
            "ring-8" => Some(Self::ring8()),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn vars(&self) -> &[Vec<f64>] {
        &self.vars
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Per-component log `w_k N(x; mu_k, diag var_k)`.
    fn component_log_terms(&self, x: &[f64]) -> Vec<f64> {
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(&w, (mu, var))| {
                if w == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut log_pdf = w.ln();
                for d in 0..self.dim {
                    let z = x[d] - mu[d];
                    log_pdf += -half_log_2pi - 0.5 * var[d].ln() - 0.5 * z * z / var[d];
                }
                log_pdf
            })
            .collect()
    }

    /// Log-density via max-shifted log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let terms = self.component_log_terms(x);
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let sum: f64 = terms.iter().map(|&t| (t - m).exp()).sum();
        let ld = m + sum.ln();
        Ok(if ld < LOG_DENSITY_FLOOR { f64::NEG_INFINITY } else { ld })
    }

    /// Score `grad log density`: posterior-responsibility-weighted sum of
    /// `(mu_k - x) / var_k`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let terms = self.component_log_terms(x);
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut grad = vec![0.0; self.dim];
        if m == f64::NEG_INFINITY {
            return Ok(grad);
        }
        let total: f64 = terms.iter().map(|&t| (t - m).exp()).sum();
        for (k, &term) in terms.iter().enumerate() {
            let resp = (term - m).exp() / total;
            if resp == 0.0 {
                continue;
            }
            for d in 0..self.dim {
                grad[d] += resp * (self.means[k][d] - x[d]) / self.vars[k][d];
            }
        }
        Ok(grad)
    }

    /// The marginal of this mixture pushed through the forward kernel to
    /// time `t`: means scale by `m_t`, variances become `m_t^2 var + s_t^2`.
    pub fn perturbed(&self, spec: &ScheduleSpec, t: f64) -> Result<GaussianMixture> {
        let k = spec.kernel_coeffs(t)?;
        let m2 = k.mean_scale * k.mean_scale;
        let s2 = k.std * k.std;
        let means = self
            .means
            .iter()
            .map(|mu| mu.iter().map(|&v| k.mean_scale * v).collect())
            .collect();
        let vars = self
            .vars
            .iter()
            .map(|var| var.iter().map(|&v| m2 * v + s2).collect())
            .collect();
        GaussianMixture::new(self.weights.clone(), means, vars)
    }

    /// Draw one sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.weights.len() - 1;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u <= acc {
                k = i;
                break;
            }
        }
        (0..self.dim)
            .map(|d| {
                let e: f64 = rng.sample(StandardNormal);
                self.means[k][d] + self.vars[k][d].sqrt() * e
            })
            .collect()
    }

    /// Draw `n` samples.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Optimal discriminator between `p` (real) and `q` (generated):
/// `d*(x) = p(x) / (p(x) + q(x))`, evaluated as a numerically stable
/// sigmoid of the log-density difference.
///
/// The branch on the larger log-density makes the complement identity
/// `d*(p,q,x) + d*(q,p,x) = 1` hold exactly in floating point.
pub fn optimal_discriminator(p: &GaussianMixture, q: &GaussianMixture, x: &[f64]) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::Shape { expected: p.dim(), got: q.dim() });
    }
    let lp = p.log_density(x)?;
    let lq = q.log_density(x)?;
    if lp == lq {
        return Ok(0.5);
    }
    Ok(if lp > lq {
        1.0 / (1.0 + (lq - lp).exp())
    } else {
        1.0 - 1.0 / (1.0 + (lp - lq).exp())
    })
}

/// Gradient of the log density ratio: `score(p, x) - score(q, x)`.
pub fn grad_log_ratio(p: &GaussianMixture, q: &GaussianMixture, x: &[f64]) -> Result<Vec<f64>> {
    if p.dim() != q.dim() {
        return Err(Error::Shape { expected: p.dim(), got: q.dim() });
    }
    let sp = p.score(x)?;
    let sq = q.score(x)?;
    Ok(sp.iter().zip(&sq).map(|(&a, &b)| a - b).collect())
}

/// Exact marginal moments of a linear generative SDE.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSdeMoments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Marginal of the VP generative process driven by the fixed linear score
/// model `s(x, t) = -x + bias`, integrated from the initial law
/// `N(init_mean, init_var I)` at `t_max` down to `t`.
///
/// With `kappa = exp(-1/2 int_t^T beta)` the per-dimension moment ODEs solve
/// to `mean = kappa init_mean + 2 bias (1 - kappa)` and
/// `var = kappa^2 init_var + (1 - kappa^2)`.
pub fn linear_sde_marginal(
    spec: &ScheduleSpec,
    t: f64,
    bias: &[f64],
    init_mean: &[f64],
    init_var: f64,
) -> Result<LinearSdeMoments> {
    if !spec.family.is_vp() {
        return Err(Error::Unsupported(
            "linear_sde_marginal requires a VP family".into(),
        ));
    }
    if bias.len() != init_mean.len() {
        return Err(Error::Shape { expected: init_mean.len(), got: bias.len() });
    }
    if !(init_var > 0.0) {
        return Err(Error::Domain(format!("init_var must be positive, got {init_var}")));
    }
    let m_t = spec.kernel_coeffs(t)?.mean_scale;
    let m_end = spec.kernel_coeffs(spec.t_max)?.mean_scale;
    let kappa = m_end / m_t;
    let mean = init_mean
        .iter()
        .zip(bias)
        .map(|(&mu, &c)| kappa * mu + 2.0 * c * (1.0 - kappa))
        .collect();
    let var = vec![kappa * kappa * init_var + (1.0 - kappa * kappa); bias.len()];
    Ok(LinearSdeMoments { mean, var })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn std_normal_1d() -> GaussianMixture {
        GaussianMixture::gaussian(vec![0.0], 1.0).unwrap()
    }

    #[test]
    fn log_density_standard_normal_at_mode() {
        let g = std_normal_1d();
        let ld = g.log_density(&[0.0]).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((ld - expected).abs() < 1e-15);
        assert!((expected - -0.9189).abs() < 1e-4);
    }

    #[test]
    fn log_density_symmetric_pair() {
        let g = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![-1.0], vec![1.0]],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap();
        let ld = g.log_density(&[0.0]).unwrap();
        let expected = ((-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((ld - expected).abs() < 1e-14);
    }

    #[test]
    fn log_density_matches_direct_summation() {
        // Brute-force density sum without log-sum-exp at well-scaled points.
        let g = GaussianMixture::ring8();
        for &x in &[[0.0, 0.0], [4.0, 0.0], [-2.5, 2.5], [1.0, -3.0]] {
            let direct: f64 = (0..g.n_components())
                .map(|k| {
                    let mut pdf = g.weights()[k];
                    for d in 0..2 {
                        let var = g.vars()[k][d];
                        let z = x[d] - g.means()[k][d];
                        pdf *= (-0.5 * z * z / var).exp()
                            / (2.0 * std::f64::consts::PI * var).sqrt();
                    }
                    pdf
                })
                .sum();
            let ld = g.log_density(&x).unwrap();
            assert!((ld - direct.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn log_density_underflow_is_neg_infinity() {
        let g = std_normal_1d();
        assert_eq!(g.log_density(&[60.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn score_standard_normal() {
        let g = std_normal_1d();
        let s = g.score(&[2.0]).unwrap();
        assert!((s[0] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn score_symmetric_zero() {
        let g = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![-1.0], vec![1.0]],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap();
        let s = g.score(&[0.0]).unwrap();
        assert!(s[0].abs() < 1e-14);
    }

    fn finite_diff_score(g: &GaussianMixture, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|d| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[d] += h;
                lo[d] -= h;
                (g.log_density(&hi).unwrap() - g.log_density(&lo).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn score_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let dim = 1 + trial % 2;
            let n_comp = 1 + trial % 3;
            let mut weights: Vec<f64> = (0..n_comp).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            // Renormalize exactly so the constructor accepts the weights.
            let total: f64 = weights.iter().sum();
            let last = weights.len() - 1;
            weights[last] += 1.0 - total;
            let means = (0..n_comp)
                .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let vars = (0..n_comp)
                .map(|_| (0..dim).map(|_| rng.random_range(0.2..2.0)).collect())
                .collect();
            let g = GaussianMixture::new(weights, means, vars).unwrap();
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
            let analytic = g.score(&x).unwrap();
            let fd = finite_diff_score(&g, &x);
            for d in 0..dim {
                let scale = analytic[d].abs().max(1e-3);
                assert!(
                    (analytic[d] - fd[d]).abs() / scale < 1e-5,
                    "trial {trial} dim {d}: {} vs {}",
                    analytic[d],
                    fd[d]
                );
            }
        }
    }

    #[test]
    fn perturbed_identity_at_zero() {
        let spec = ScheduleSpec::lvp(0.1, 20.0).unwrap();
        let g = GaussianMixture::bimodal_1d();
        let p = g.perturbed(&spec, 0.0).unwrap();
        assert_eq!(p, g);
    }

    #[test]
    fn perturbed_point_mass_limit_under_ve() {
        // Near-point-mass at the origin pushed to sigma_t = 2 is N(0, 4).
        let spec = ScheduleSpec::gve(2.0, 50.0).unwrap();
        let g = GaussianMixture::gaussian(vec![0.0], 1e-12).unwrap();
        let p = g.perturbed(&spec, 0.0).unwrap();
        assert!((p.vars()[0][0] - 4.0).abs() < 1e-9);
        assert_eq!(p.means()[0][0], 0.0);
    }

    #[test]
    fn perturbed_matches_monte_carlo_moments() {
        let spec = ScheduleSpec::lvp(0.1, 20.0).unwrap();
        let g = GaussianMixture::bimodal_1d();
        let t = 0.4;
        let p = g.perturbed(&spec, t).unwrap();
        // Analytic mixture moments.
        let mean_true: f64 = p
            .weights()
            .iter()
            .zip(p.means())
            .map(|(&w, mu)| w * mu[0])
            .sum();
        let second: f64 = p
            .weights()
            .iter()
            .zip(p.means().iter().zip(p.vars()))
            .map(|(&w, (mu, var))| w * (var[0] + mu[0] * mu[0]))
            .sum();
        let var_true = second - mean_true * mean_true;

        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let x0 = g.sample(&mut rng);
            let noise: Vec<f64> = (0..1).map(|_| rng.sample(StandardNormal)).collect();
            let xt = spec.perturb(&x0, t, &noise).unwrap();
            sum += xt[0];
            sum2 += xt[0] * xt[0];
        }
        let mean_mc = sum / n as f64;
        let var_mc = sum2 / n as f64 - mean_mc * mean_mc;
        let se_mean = (var_true / n as f64).sqrt();
        assert!((mean_mc - mean_true).abs() < 3.0 * se_mean);
        // Variance of the sample variance is approximately 2 var^2 / n for
        // Gaussian-ish tails; allow a wide kurtosis margin.
        let se_var = (2.0f64 * var_true * var_true / n as f64).sqrt() * 2.0;
        assert!((var_mc - var_true).abs() < 3.0 * se_var);
    }

    #[test]
    fn perturbed_semigroup_under_vp() {
        let spec = ScheduleSpec::lvp(0.1, 20.0).unwrap();
        let g = GaussianMixture::bimodal_1d();
        let (t1, t2) = (0.3, 0.8);
        let direct = g.perturbed(&spec, t2).unwrap();
        // Conditional kernel from t1 to t2: scale m2/m1, variance
        // s2^2 - (m2/m1)^2 s1^2.
        let k1 = spec.kernel_coeffs(t1).unwrap();
        let k2 = spec.kernel_coeffs(t2).unwrap();
        let scale = k2.mean_scale / k1.mean_scale;
        let var_cond = k2.std.powi(2) - scale * scale * k1.std.powi(2);
        let stage = g.perturbed(&spec, t1).unwrap();
        for k in 0..g.n_components() {
            let mean_two_step = scale * stage.means()[k][0];
            let var_two_step = scale * scale * stage.vars()[k][0] + var_cond;
            assert!((mean_two_step - direct.means()[k][0]).abs() < 1e-10);
            assert!((var_two_step - direct.vars()[k][0]).abs() < 1e-10);
        }
    }

    #[test]
    fn optimal_discriminator_cases() {
        let p = std_normal_1d();
        let q = GaussianMixture::gaussian(vec![1.0], 1.0).unwrap();
        assert_eq!(optimal_discriminator(&p, &p, &[0.3]).unwrap(), 0.5);
        let mid = optimal_discriminator(&p, &q, &[0.5]).unwrap();
        assert!((mid - 0.5).abs() < 1e-15);
        // log p(0) - log q(0) = 0.5, so d = sigmoid(0.5).
        let d = optimal_discriminator(&p, &q, &[0.0]).unwrap();
        let expected = 1.0 / (1.0 + (-0.5f64).exp());
        assert!((d - expected).abs() < 1e-15);
        assert!((expected - 0.6225).abs() < 1e-4);
    }

    #[test]
    fn optimal_discriminator_complement_exact() {
        let p = GaussianMixture::bimodal_1d();
        let q = GaussianMixture::gaussian(vec![0.5], 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = [rng.random_range(-6.0..6.0)];
            let a = optimal_discriminator(&p, &q, &x).unwrap();
            let b = optimal_discriminator(&q, &p, &x).unwrap();
            assert_eq!(a + b, 1.0);
        }
    }

    #[test]
    fn optimal_discriminator_saturates_without_nan() {
        let p = std_normal_1d();
        let q = GaussianMixture::gaussian(vec![80.0], 1.0).unwrap();
        let d = optimal_discriminator(&p, &q, &[0.0]).unwrap();
        assert_eq!(d, 1.0);
        let d = optimal_discriminator(&p, &q, &[80.0]).unwrap();
        assert_eq!(d, 0.0);
        // Both floors hit: equal by convention.
        let far = optimal_discriminator(&p, &q, &[2000.0]).unwrap();
        assert_eq!(far, 0.5);
    }

    #[test]
    fn logit_reproduces_log_density_difference() {
        let p = GaussianMixture::bimodal_1d();
        let q = GaussianMixture::gaussian(vec![0.0], 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x = [rng.random_range(-4.0..4.0)];
            let d = optimal_discriminator(&p, &q, &x).unwrap();
            let logit = (d / (1.0 - d)).ln();
            let expected = p.log_density(&x).unwrap() - q.log_density(&x).unwrap();
            if expected.abs() < 30.0 {
                assert!((logit - expected).abs() < 1e-10, "{logit} vs {expected}");
            }
        }
    }

    #[test]
    fn grad_log_ratio_cases() {
        let p = std_normal_1d();
        assert_eq!(grad_log_ratio(&p, &p, &[1.3]).unwrap(), vec![0.0]);

        // Equal-variance Gaussians: constant (mu1 - mu2) / var.
        let a = GaussianMixture::gaussian(vec![2.0], 0.5).unwrap();
        let b = GaussianMixture::gaussian(vec![-1.0], 0.5).unwrap();
        for &x in &[-3.0, 0.0, 4.0] {
            let g = grad_log_ratio(&a, &b, &[x]).unwrap();
            assert!((g[0] - 3.0 / 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn grad_log_ratio_antisymmetric_and_matches_fd() {
        let p = GaussianMixture::bimodal_1d();
        let q = GaussianMixture::gaussian(vec![0.5], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = [rng.random_range(-3.5..3.5)];
            let fwd = grad_log_ratio(&p, &q, &x).unwrap();
            let rev = grad_log_ratio(&q, &p, &x).unwrap();
            assert_eq!(fwd[0], -rev[0]);

            let h = 1e-5;
            let f = |v: f64| {
                p.log_density(&[v]).unwrap() - q.log_density(&[v]).unwrap()
            };
            let fd = (f(x[0] + h) - f(x[0] - h)) / (2.0 * h);
            let scale = fwd[0].abs().max(1e-3);
            assert!((fwd[0] - fd).abs() / scale < 1e-6);
        }
    }

    #[test]
    fn linear_sde_marginal_stationary() {
        let spec = ScheduleSpec::lvp(0.1, 20.0).unwrap();
        for &t in &[0.0, 0.2, 0.6, 1.0] {
            let m = linear_sde_marginal(&spec, t, &[0.0], &[0.0], 1.0).unwrap();
            assert!(m.mean[0].abs() < 1e-14);
            assert!((m.var[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_sde_marginal_bias_offset() {
        // Scalar ODE solved by hand: mean(t) = 2c (1 - m_T / m_t) for a
        // zero-mean start; at t -> 0 the offset approaches 2c (1 - m_T).
        let spec = ScheduleSpec::lvp(0.1, 20.0).unwrap();
        let c = 0.7;
        let m_end = spec.kernel_coeffs(1.0).unwrap().mean_scale;
        for &t in &[0.0, 0.1, 0.5] {
            let m_t = spec.kernel_coeffs(t).unwrap().mean_scale;
            let kappa = m_end / m_t;
            let expected = 2.0 * c * (1.0 - kappa);
            let got = linear_sde_marginal(&spec, t, &[c], &[0.0], 1.0).unwrap();
            assert!((got.mean[0] - expected).abs() < 1e-12);
        }
        let at_zero = linear_sde_marginal(&spec, 0.0, &[c], &[0.0], 1.0).unwrap();
        assert!((at_zero.mean[0] - 2.0 * c * (1.0 - m_end)).abs() < 1e-12);
    }

    #[test]
    fn linear_sde_marginal_rejects_ve() {
        let spec = ScheduleSpec::gve(0.01, 50.0).unwrap();
        assert!(matches!(
            linear_sde_marginal(&spec, 0.5, &[0.0], &[0.0], 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn mixture_validation() {
        assert!(GaussianMixture::new(vec![0.6, 0.6], vec![vec![0.0]; 2], vec![vec![1.0]; 2]).is_err());
        assert!(GaussianMixture::new(vec![1.0], vec![vec![0.0]], vec![vec![0.0]]).is_err());
        assert!(GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.0], vec![0.0, 1.0]],
            vec![vec![1.0], vec![1.0, 1.0]]
        )
        .is_err());
        let g = GaussianMixture::bimodal_1d();
        assert!(matches!(g.log_density(&[0.0, 0.0]), Err(Error::Shape { .. })));
    }
}
