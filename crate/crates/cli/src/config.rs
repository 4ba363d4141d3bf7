//! Flat `key=value` run configuration: one file drives every pipeline
//! stage. `#` starts a comment, unknown keys are rejected, every value is
//! validated at parse time, and serialization round-trips bit-exactly.

use dgsim::csvio::fmt_f64;
use dgsim::nets::{LrSchedule, Weighting};
use dgsim::sampler::{ChurnParams, GridKind, SamplerConfig, Solver};
use dgsim::sde::{Family, ScheduleSpec};
use std::fmt;

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "config line {}, key `{}`: {}", self.line, self.key, self.msg)
        } else {
            write!(f, "config key `{}`: {}", self.key, self.msg)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Which dataset feeds the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dataset {
    Named(String),
    Csv(String),
}

impl Dataset {
    pub fn as_config_value(&self) -> String {
        match self {
            Dataset::Named(n) => n.clone(),
            Dataset::Csv(p) => format!("csv:{p}"),
        }
    }
}

/// Fully validated run configuration with documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Dataset,
    pub out_dir: Option<String>,
    pub seed: u64,

    pub family: Family,
    pub beta_min: f64,
    pub beta_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
    pub t_max: f64,

    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub time_embed: usize,
    pub t_eps: f64,
    pub truncation: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub lr_schedule: LrSchedule,

    pub score_steps: usize,
    pub score_batch: usize,
    pub score_lr: f64,
    pub score_weighting: Weighting,

    pub disc_steps: usize,
    pub disc_batch: usize,
    pub disc_lr: f64,
    pub disc_weighting: Weighting,
    pub disc_fake_n: usize,

    pub solver: Solver,
    pub nfe: usize,
    pub grid: GridKind,
    pub churn_total: f64,
    pub s_noise: f64,
    pub churn_sigma_lo: f64,
    pub churn_sigma_hi: f64,
    pub guidance_weight: f64,
    pub n_samples: usize,
    pub rejection_threshold: f64,
    pub oracle_bias: f64,

    pub eval_n: usize,
    pub trace_bins: usize,
    pub sweep_nfes: Vec<usize>,
    pub sweep_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: Dataset::Named("bimodal-1d".into()),
            out_dir: None,
            seed: 42,

            family: Family::Lvp,
            beta_min: ScheduleSpec::DEFAULT_BETA_MIN,
            beta_max: ScheduleSpec::DEFAULT_BETA_MAX,
            sigma_min: ScheduleSpec::DEFAULT_SIGMA_MIN,
            sigma_max: ScheduleSpec::DEFAULT_SIGMA_MAX,
            rho: ScheduleSpec::DEFAULT_RHO,
            t_max: 1.0,

            hidden_width: 128,
            hidden_layers: 3,
            time_embed: 32,
            t_eps: 1e-3,
            truncation: 1e-5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            lr_schedule: LrSchedule::Cosine,

            score_steps: 24_000,
            score_batch: 256,
            score_lr: 7e-4,
            score_weighting: Weighting::GSquared,

            disc_steps: 16_000,
            disc_batch: 128,
            disc_lr: 1e-3,
            disc_weighting: Weighting::Uniform,
            disc_fake_n: 8192,

            solver: Solver::ChurnAlg1,
            nfe: 64,
            grid: GridKind::RhoWarped,
            churn_total: 0.0,
            s_noise: 1.0,
            churn_sigma_lo: 0.05,
            churn_sigma_hi: 50.0,
            guidance_weight: 1.0,
            n_samples: 4000,
            rejection_threshold: 0.5,
            oracle_bias: 0.0,

            eval_n: 4000,
            trace_bins: 64,
            sweep_nfes: vec![16, 32, 64, 128],
            sweep_n: 2000,
        }
    }
}

fn err(line: usize, key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError { line, key: key.into(), msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, val: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    val.parse::<T>().map_err(|e| err(line, key, format!("cannot parse `{val}`: {e}")))
}

fn parse_weighting(line: usize, key: &str, val: &str) -> Result<Weighting, ConfigError> {
    match val {
        "uniform" => Ok(Weighting::Uniform),
        "g2" => Ok(Weighting::GSquared),
        other => Err(err(line, key, format!("unknown weighting `{other}` (uniform|g2)"))),
    }
}

/// Parse a flat `key=value` text into a validated config.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, val)) = content.split_once('=') else {
            return Err(err(line, content, "expected `key = value`"));
        };
        let key = key.trim();
        let val = val.trim();
        if seen.iter().any(|k| k == key) {
            return Err(err(line, key, "duplicate key"));
        }
        seen.push(key.to_string());
        match key {
            "dataset" => {
                cfg.dataset = if let Some(path) = val.strip_prefix("csv:") {
                    Dataset::Csv(path.trim().to_string())
                } else {
                    Dataset::Named(val.to_string())
                };
            }
            "out_dir" => cfg.out_dir = Some(val.to_string()),
            "seed" => cfg.seed = parse_num(line, key, val)?,

            "family" => {
                cfg.family = match val {
                    "lvp" => Family::Lvp,
                    "cvp" => Family::Cvp,
                    "gve" => Family::Gve,
                    "wve-invrho" => Family::WveInvRho,
                    "wve-edm" => Family::WveEdm,
                    other => {
                        return Err(err(
                            line,
                            key,
                            format!("unknown family `{other}` (lvp|cvp|gve|wve-invrho|wve-edm)"),
                        ))
                    }
                }
            }
            "beta_min" => cfg.beta_min = parse_num(line, key, val)?,
            "beta_max" => cfg.beta_max = parse_num(line, key, val)?,
            "sigma_min" => cfg.sigma_min = parse_num(line, key, val)?,
            "sigma_max" => cfg.sigma_max = parse_num(line, key, val)?,
            "rho" => cfg.rho = parse_num(line, key, val)?,
            "t_max" => cfg.t_max = parse_num(line, key, val)?,

            "hidden_width" => cfg.hidden_width = parse_num(line, key, val)?,
            "hidden_layers" => cfg.hidden_layers = parse_num(line, key, val)?,
            "time_embed" => cfg.time_embed = parse_num(line, key, val)?,
            "t_eps" => cfg.t_eps = parse_num(line, key, val)?,
            "truncation" => cfg.truncation = parse_num(line, key, val)?,
            "adam_beta1" => cfg.adam_beta1 = parse_num(line, key, val)?,
            "adam_beta2" => cfg.adam_beta2 = parse_num(line, key, val)?,
            "adam_eps" => cfg.adam_eps = parse_num(line, key, val)?,
            "lr_schedule" => {
                cfg.lr_schedule = match val {
                    "constant" => LrSchedule::Constant,
                    "cosine" => LrSchedule::Cosine,
                    other => {
                        return Err(err(
                            line,
                            key,
                            format!("unknown schedule `{other}` (constant|cosine)"),
                        ))
                    }
                }
            }

            "score_steps" => cfg.score_steps = parse_num(line, key, val)?,
            "score_batch" => cfg.score_batch = parse_num(line, key, val)?,
            "score_lr" => cfg.score_lr = parse_num(line, key, val)?,
            "score_weighting" => cfg.score_weighting = parse_weighting(line, key, val)?,

            "disc_steps" => cfg.disc_steps = parse_num(line, key, val)?,
            "disc_batch" => cfg.disc_batch = parse_num(line, key, val)?,
            "disc_lr" => cfg.disc_lr = parse_num(line, key, val)?,
            "disc_weighting" => cfg.disc_weighting = parse_weighting(line, key, val)?,
            "disc_fake_n" => cfg.disc_fake_n = parse_num(line, key, val)?,

            "solver" => {
                cfg.solver = match val {
                    "em" => Solver::EulerMaruyama,
                    "heun" => Solver::PfOdeHeun,
                    "churn" => Solver::ChurnAlg1,
                    other => {
                        return Err(err(line, key, format!("unknown solver `{other}` (em|heun|churn)")))
                    }
                }
            }
            "nfe" => cfg.nfe = parse_num(line, key, val)?,
            "grid" => {
                cfg.grid = match val {
                    "rho" => GridKind::RhoWarped,
                    "uniform" => GridKind::Uniform,
                    other => {
                        return Err(err(line, key, format!("unknown grid `{other}` (rho|uniform)")))
                    }
                }
            }
            "churn_total" => cfg.churn_total = parse_num(line, key, val)?,
            "s_noise" => cfg.s_noise = parse_num(line, key, val)?,
            "churn_sigma_lo" => cfg.churn_sigma_lo = parse_num(line, key, val)?,
            "churn_sigma_hi" => cfg.churn_sigma_hi = parse_num(line, key, val)?,
            "guidance_weight" => cfg.guidance_weight = parse_num(line, key, val)?,
            "n_samples" => cfg.n_samples = parse_num(line, key, val)?,
            "rejection_threshold" => cfg.rejection_threshold = parse_num(line, key, val)?,
            "oracle_bias" => cfg.oracle_bias = parse_num(line, key, val)?,

            "eval_n" => cfg.eval_n = parse_num(line, key, val)?,
            "trace_bins" => cfg.trace_bins = parse_num(line, key, val)?,
            "sweep_n" => cfg.sweep_n = parse_num(line, key, val)?,
            "sweep_nfes" => {
                let parts: Result<Vec<usize>, _> = val
                    .split(',')
                    .map(|p| parse_num::<usize>(line, key, p.trim()))
                    .collect();
                let parts = parts?;
                if parts.is_empty() || parts.contains(&0) {
                    return Err(err(line, key, "need a nonempty list of positive NFEs"));
                }
                cfg.sweep_nfes = parts;
            }

            other => return Err(err(line, other, "unknown key")),
        }
    }
    cfg.validate().map_err(|mut e| {
        // Attach the offending line when the key appeared in the file.
        if let Some(pos) = text.lines().position(|l| {
            l.split('#').next().unwrap_or("").split('=').next().map(str::trim) == Some(e.key.as_str())
        }) {
            e.line = pos + 1;
        }
        e
    })?;
    Ok(cfg)
}

impl RunConfig {
    /// Cross-field validation; delegates schedule constraints to the
    /// schedule type itself.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.schedule().map_err(|e| err(0, "family", e.to_string()))?;
        if !(self.t_eps > 0.0 && self.t_eps < self.t_max) {
            return Err(err(0, "t_eps", format!("must lie in (0, t_max), got {}", self.t_eps)));
        }
        if !(self.truncation > 0.0 && self.truncation < 0.5) {
            return Err(err(0, "truncation", "must lie in (0, 0.5)"));
        }
        if !(self.rejection_threshold > 0.0 && self.rejection_threshold < 1.0) {
            return Err(err(0, "rejection_threshold", "must lie in (0, 1)"));
        }
        if self.time_embed == 0 || self.time_embed % 2 != 0 {
            return Err(err(0, "time_embed", "must be a positive even number"));
        }
        for (key, v) in [
            ("hidden_width", self.hidden_width),
            ("hidden_layers", self.hidden_layers),
            ("score_steps", self.score_steps),
            ("score_batch", self.score_batch),
            ("disc_steps", self.disc_steps),
            ("disc_batch", self.disc_batch),
            ("disc_fake_n", self.disc_fake_n),
            ("nfe", self.nfe),
            ("n_samples", self.n_samples),
            ("eval_n", self.eval_n),
            ("trace_bins", self.trace_bins),
            ("sweep_n", self.sweep_n),
        ] {
            if v == 0 {
                return Err(err(0, key, "must be positive"));
            }
        }
        if self.churn_total < 0.0 {
            return Err(err(0, "churn_total", "must be >= 0"));
        }
        if !(self.s_noise > 0.0) {
            return Err(err(0, "s_noise", "must be positive"));
        }
        if self.sweep_nfes.is_empty() {
            return Err(err(0, "sweep_nfes", "must be nonempty"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> dgsim::Result<ScheduleSpec> {
        ScheduleSpec {
            family: self.family,
            beta_min: self.beta_min,
            beta_max: self.beta_max,
            sigma_min: self.sigma_min,
            sigma_max: self.sigma_max,
            rho: self.rho,
            t_max: self.t_max,
        }
        .validated()
    }

    pub fn hidden(&self) -> Vec<usize> {
        vec![self.hidden_width; self.hidden_layers]
    }

    pub fn score_train(&self) -> dgsim::nets::TrainConfig {
        dgsim::nets::TrainConfig {
            batch: self.score_batch,
            steps: self.score_steps,
            lr: self.score_lr,
            lr_schedule: self.lr_schedule,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            t_eps: self.t_eps,
            weighting: self.score_weighting,
            truncation: self.truncation,
            seed: self.seed,
        }
    }

    pub fn disc_train(&self) -> dgsim::nets::TrainConfig {
        dgsim::nets::TrainConfig {
            batch: self.disc_batch,
            steps: self.disc_steps,
            lr: self.disc_lr,
            lr_schedule: self.lr_schedule,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            t_eps: self.t_eps,
            weighting: self.disc_weighting,
            truncation: self.truncation,
            seed: self.seed ^ 0xd15c,
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            solver: self.solver,
            nfe: self.nfe,
            grid: self.grid,
            churn: ChurnParams {
                total: self.churn_total,
                s_noise: self.s_noise,
                sigma_lo: self.churn_sigma_lo,
                sigma_hi: self.churn_sigma_hi,
            },
            guidance_weight: self.guidance_weight,
            t_eps: self.t_eps,
            seed: self.seed,
            record_trajectories: false,
        }
    }

    /// Canonical serialization; floats carry 17 significant digits so the
    /// round-trip is exact.
    pub fn serialize(&self) -> String {
        let weighting = |w: Weighting| match w {
            Weighting::Uniform => "uniform",
            Weighting::GSquared => "g2",
        };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("dataset", self.dataset.as_config_value());
        if let Some(d) = &self.out_dir {
            kv("out_dir", d.clone());
        }
        kv("seed", self.seed.to_string());
        kv(
            "family",
            match self.family {
                Family::Lvp => "lvp",
                Family::Cvp => "cvp",
                Family::Gve => "gve",
                Family::WveInvRho => "wve-invrho",
                Family::WveEdm => "wve-edm",
            }
            .to_string(),
        );
        kv("beta_min", fmt_f64(self.beta_min));
        kv("beta_max", fmt_f64(self.beta_max));
        kv("sigma_min", fmt_f64(self.sigma_min));
        kv("sigma_max", fmt_f64(self.sigma_max));
        kv("rho", fmt_f64(self.rho));
        kv("t_max", fmt_f64(self.t_max));
        kv("hidden_width", self.hidden_width.to_string());
        kv("hidden_layers", self.hidden_layers.to_string());
        kv("time_embed", self.time_embed.to_string());
        kv("t_eps", fmt_f64(self.t_eps));
        kv("truncation", fmt_f64(self.truncation));
        kv("adam_beta1", fmt_f64(self.adam_beta1));
        kv("adam_beta2", fmt_f64(self.adam_beta2));
        kv("adam_eps", fmt_f64(self.adam_eps));
        kv(
            "lr_schedule",
            match self.lr_schedule {
                LrSchedule::Constant => "constant",
                LrSchedule::Cosine => "cosine",
            }
            .to_string(),
        );
        kv("score_steps", self.score_steps.to_string());
        kv("score_batch", self.score_batch.to_string());
        kv("score_lr", fmt_f64(self.score_lr));
        kv("score_weighting", weighting(self.score_weighting).to_string());
        kv("disc_steps", self.disc_steps.to_string());
        kv("disc_batch", self.disc_batch.to_string());
        kv("disc_lr", fmt_f64(self.disc_lr));
        kv("disc_weighting", weighting(self.disc_weighting).to_string());
        kv("disc_fake_n", self.disc_fake_n.to_string());
        kv(
            "solver",
            match self.solver {
                Solver::EulerMaruyama => "em",
                Solver::PfOdeHeun => "heun",
                Solver::ChurnAlg1 => "churn",
            }
            .to_string(),
        );
        kv("nfe", self.nfe.to_string());
        kv(
            "grid",
            match self.grid {
                GridKind::RhoWarped => "rho",
                GridKind::Uniform => "uniform",
            }
            .to_string(),
        );
        kv("churn_total", fmt_f64(self.churn_total));
        kv("s_noise", fmt_f64(self.s_noise));
        kv("churn_sigma_lo", fmt_f64(self.churn_sigma_lo));
        kv("churn_sigma_hi", fmt_f64(self.churn_sigma_hi));
        kv("guidance_weight", fmt_f64(self.guidance_weight));
        kv("n_samples", self.n_samples.to_string());
        kv("rejection_threshold", fmt_f64(self.rejection_threshold));
        kv("oracle_bias", fmt_f64(self.oracle_bias));
        kv("eval_n", self.eval_n.to_string());
        kv("trace_bins", self.trace_bins.to_string());
        kv(
            "sweep_nfes",
            self.sweep_nfes
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("sweep_n", self.sweep_n.to_string());
        s
    }
}
