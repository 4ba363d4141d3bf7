//! The five pipeline commands. Every command is deterministic per
//! (config, seed), writes artifacts only under the output directory, and
//! validates what it wrote before reporting success.

use crate::config::{Dataset, RunConfig};
use dgsim::csvio;
use dgsim::diagnostics::{
    data_forward_trace, error_decomposition, nfe_sweep, ratio_from_disc, trace_log_ratio,
    w1_points, DecompOptions,
};
use dgsim::nets::{
    load_params, save_params, train_disc, train_score, DataSource, HeadKind, NetParams,
};
use dgsim::oracle::GaussianMixture;
use dgsim::sampler::{guidance_from_discriminator, rejection_sample, sample, SamplerConfig};
use dgsim::sde::ScheduleSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

pub type CmdResult<T> = Result<T, Box<dyn std::error::Error>>;

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn ensure_out(&self) -> CmdResult<()> {
        std::fs::create_dir_all(&self.out)?;
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn spec(&self) -> CmdResult<ScheduleSpec> {
        Ok(self.cfg.schedule()?)
    }

    /// The training/sampling data source plus its analytic form when the
    /// dataset is a named mixture.
    fn dataset(&self) -> CmdResult<(DataSource, Option<GaussianMixture>)> {
        match &self.cfg.dataset {
            Dataset::Named(name) => {
                let g = GaussianMixture::by_name(name)
                    .ok_or_else(|| format!("unknown dataset `{name}` (bimodal-1d|ring-8)"))?;
                Ok((DataSource::Mixture(g.clone()), Some(g)))
            }
            Dataset::Csv(path) => {
                let pts = csvio::read_points(path)
                    .map_err(|e| format!("dataset `{path}`: {e}"))?;
                Ok((DataSource::Points(pts), None))
            }
        }
    }

    fn analytic_dataset(&self) -> CmdResult<GaussianMixture> {
        let (_, analytic) = self.dataset()?;
        analytic.ok_or_else(|| {
            "this command needs an analytic reference; use a named dataset".into()
        })
    }
}

fn load_head(path: &Path, head: HeadKind) -> CmdResult<NetParams> {
    let params = load_params(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if params.arch.head != head {
        return Err(format!(
            "{}: expected a {head:?} network, found {:?}",
            path.display(),
            params.arch.head
        )
        .into());
    }
    Ok(params)
}

fn net_score_fn(params: NetParams) -> impl Fn(&[f64], f64) -> Vec<f64> {
    move |x: &[f64], t: f64| params.forward_score(x, t).expect("head and dims checked")
}

fn oracle_score_fn(
    data: GaussianMixture,
    spec: ScheduleSpec,
    bias: f64,
) -> impl Fn(&[f64], f64) -> Vec<f64> {
    move |x: &[f64], t: f64| {
        let mut s = data
            .perturbed(&spec, t)
            .expect("grid times in domain")
            .score(x)
            .expect("dims checked");
        for v in &mut s {
            *v += bias;
        }
        s
    }
}

fn check_csv_written(path: &Path) -> CmdResult<()> {
    let meta = std::fs::metadata(path)?;
    if meta.len() == 0 {
        return Err(format!("{}: wrote an empty artifact", path.display()).into());
    }
    Ok(())
}

pub fn cmd_train_score(ctx: &Ctx) -> CmdResult<()> {
    ctx.ensure_out()?;
    let spec = ctx.spec()?;
    let (data, _) = ctx.dataset()?;
    ctx.say(format!(
        "training score network: {} steps, batch {}",
        ctx.cfg.score_steps, ctx.cfg.score_batch
    ));
    let run = train_score(
        &ctx.cfg.score_train(),
        &data,
        &spec,
        &ctx.cfg.hidden(),
        ctx.cfg.time_embed,
    )?;
    let net_path = ctx.path("score.net");
    let loss_path = ctx.path("score_loss.csv");
    save_params(&run.params, &net_path)?;
    csvio::write_loss_curve(&loss_path, &run.loss_curve)?;

    load_head(&net_path, HeadKind::Score)?;
    check_csv_written(&loss_path)?;
    ctx.say(format!(
        "wrote {} and {} (final loss {:.6})",
        net_path.display(),
        loss_path.display(),
        run.loss_curve.last().map(|&(_, l)| l).unwrap_or(f64::NAN)
    ));
    Ok(())
}

pub fn cmd_train_disc(ctx: &Ctx, score_path: &Path) -> CmdResult<()> {
    ctx.ensure_out()?;
    let spec = ctx.spec()?;
    let (real, _) = ctx.dataset()?;
    let dim = real.dim();
    let score_net = load_head(score_path, HeadKind::Score)?;
    if score_net.arch.data_dim != dim {
        return Err(format!(
            "score network dimension {} does not match dataset dimension {dim}",
            score_net.arch.data_dim
        )
        .into());
    }
    let score = net_score_fn(score_net);

    ctx.say(format!("generating {} frozen fake samples", ctx.cfg.disc_fake_n));
    let fake_cfg = SamplerConfig {
        seed: ctx.cfg.seed ^ 0xfa4e,
        record_trajectories: false,
        ..ctx.cfg.sampler()
    };
    let fakes = sample(&fake_cfg, &spec, dim, ctx.cfg.disc_fake_n, &score, None)?;
    let fakes_path = ctx.path("disc_fakes.csv");
    csvio::write_points(&fakes_path, &fakes.points)?;

    ctx.say(format!(
        "training discriminator: {} steps, batch {}",
        ctx.cfg.disc_steps, ctx.cfg.disc_batch
    ));
    let run = train_disc(
        &ctx.cfg.disc_train(),
        &real,
        &DataSource::Points(fakes.points),
        &spec,
        &ctx.cfg.hidden(),
        ctx.cfg.time_embed,
    )?;
    let net_path = ctx.path("disc.net");
    let loss_path = ctx.path("disc_loss.csv");
    save_params(&run.params, &net_path)?;
    csvio::write_loss_curve(&loss_path, &run.loss_curve)?;

    load_head(&net_path, HeadKind::Discriminator)?;
    check_csv_written(&loss_path)?;
    check_csv_written(&fakes_path)?;
    ctx.say(format!("wrote {} and {}", net_path.display(), loss_path.display()));
    Ok(())
}

pub struct SampleFlags {
    pub guided: bool,
    pub rejection: bool,
    pub oracle: bool,
    pub trace: bool,
}

pub fn cmd_sample(
    ctx: &Ctx,
    score_path: Option<&Path>,
    disc_path: Option<&Path>,
    flags: &SampleFlags,
) -> CmdResult<()> {
    ctx.ensure_out()?;
    let spec = ctx.spec()?;
    let trunc = ctx.cfg.truncation;

    let (score, dim): (Box<dyn Fn(&[f64], f64) -> Vec<f64>>, usize) = if flags.oracle {
        let data = ctx.analytic_dataset()?;
        let dim = data.dim();
        (
            Box::new(oracle_score_fn(data, spec.clone(), ctx.cfg.oracle_bias)),
            dim,
        )
    } else {
        let path = score_path.ok_or("sample needs --score (or --oracle)")?;
        let net = load_head(path, HeadKind::Score)?;
        let dim = net.arch.data_dim;
        (Box::new(net_score_fn(net)), dim)
    };

    let disc_net = match disc_path {
        Some(p) => Some(load_head(p, HeadKind::Discriminator)?),
        None => None,
    };

    let guidance: Option<Box<dyn Fn(&[f64], f64) -> Vec<f64>>> = if flags.guided {
        match (&disc_net, flags.oracle) {
            (Some(net), _) => {
                let net = net.clone();
                Some(Box::new(move |x: &[f64], t: f64| {
                    guidance_from_discriminator(&net, x, t, trunc).expect("disc head checked")
                }))
            }
            (None, true) => {
                // Oracle guidance for a constant-bias oracle score is the
                // exact correction: the negated bias.
                let bias = ctx.cfg.oracle_bias;
                Some(Box::new(move |x: &[f64], _: f64| vec![-bias; x.len()]))
            }
            (None, false) => return Err("guidance requested without a discriminator".into()),
        }
    } else {
        None
    };
    let guidance_ref = guidance.as_deref();

    let mut cfg = ctx.cfg.sampler();
    cfg.record_trajectories = flags.trace && !flags.rejection;
    let samples_path = ctx.path("samples.csv");

    if flags.rejection {
        let judge: Box<dyn Fn(&[f64]) -> f64> = match (&disc_net, flags.oracle) {
            (Some(net), _) => {
                let net = net.clone();
                Box::new(move |x: &[f64]| {
                    net.forward_disc_truncated(x, 0.0, trunc).expect("disc head checked")
                })
            }
            (None, true) => {
                // Calibration mode: the optimal discriminator between the
                // data distribution and itself sits exactly on the boundary.
                let data = ctx.analytic_dataset()?;
                Box::new(move |x: &[f64]| {
                    dgsim::oracle::optimal_discriminator(&data, &data, x).expect("dims checked")
                })
            }
            (None, false) => return Err("rejection needs a discriminator (or --oracle)".into()),
        };
        if flags.trace {
            ctx.say("note: trajectories are not recorded in rejection mode");
        }
        let (batch, alpha) = rejection_sample(
            &cfg,
            &spec,
            dim,
            &score,
            guidance_ref,
            &judge,
            ctx.cfg.n_samples,
            ctx.cfg.rejection_threshold,
        )?;
        csvio::write_points(&samples_path, &batch.accepted_points())?;
        check_csv_written(&samples_path)?;
        // The acceptance rate is part of the command's contract.
        println!("acceptance_rate = {}", csvio::fmt_f64(alpha));
        ctx.say(format!("wrote {}", samples_path.display()));
        return Ok(());
    }

    let batch = sample(&cfg, &spec, dim, ctx.cfg.n_samples, &score, guidance_ref)?;
    csvio::write_points(&samples_path, &batch.points)?;
    check_csv_written(&samples_path)?;
    if cfg.record_trajectories {
        let traj_path = ctx.path("trajectories.csv");
        csvio::write_trajectories(&traj_path, &batch, &spec)?;
        check_csv_written(&traj_path)?;
        ctx.say(format!("wrote {}", traj_path.display()));
    }
    ctx.say(format!(
        "wrote {} ({} chains, {} score evaluations each)",
        samples_path.display(),
        ctx.cfg.n_samples,
        batch.score_evals_per_chain
    ));
    Ok(())
}

pub fn cmd_eval(ctx: &Ctx, score_path: &Path, disc_path: &Path) -> CmdResult<()> {
    ctx.ensure_out()?;
    let spec = ctx.spec()?;
    let data = ctx.analytic_dataset()?;
    let dim = data.dim();
    let score_net = load_head(score_path, HeadKind::Score)?;
    let disc_net = load_head(disc_path, HeadKind::Discriminator)?;
    let trunc = ctx.cfg.truncation;
    let score = net_score_fn(score_net);
    let guide_net = disc_net.clone();
    let guidance = move |x: &[f64], t: f64| {
        guidance_from_discriminator(&guide_net, x, t, trunc).expect("disc head checked")
    };

    // Error decomposition for the unguided process.
    ctx.say("computing error decomposition");
    let report = error_decomposition(
        &spec,
        &score,
        None,
        ctx.cfg.guidance_weight,
        &data,
        &DecompOptions {
            n: ctx.cfg.eval_n,
            nfe: ctx.cfg.nfe,
            seed: ctx.cfg.seed ^ 0xe7a1,
            exact_prior: false,
            weighting: ctx.cfg.score_weighting,
            t_eps: ctx.cfg.t_eps,
            n_proj: 64,
        },
    )?;
    let report_path = ctx.path("error_report.txt");
    std::fs::write(&report_path, report.to_kv_block())?;

    // Trajectory traces: unguided vs guided vs data-forward, one ratio
    // source (the trained discriminator) for all three.
    ctx.say("tracing log density ratios");
    let n_chains = ctx.cfg.eval_n.min(256);
    let mut scfg = ctx.cfg.sampler();
    scfg.record_trajectories = true;
    scfg.seed = ctx.cfg.seed ^ 0x7bace;
    let unguided = sample(&scfg, &spec, dim, n_chains, &score, None)?;
    let guided = sample(&scfg, &spec, dim, n_chains, &score, Some(&guidance))?;
    let ratio = ratio_from_disc(&disc_net, trunc);
    let bins = ctx.cfg.trace_bins;
    let tr_un = trace_log_ratio(
        unguided.trajectories.as_ref().unwrap(),
        &spec,
        &ratio,
        bins,
        "unguided",
    )?;
    let tr_gd = trace_log_ratio(
        guided.trajectories.as_ref().unwrap(),
        &spec,
        &ratio,
        bins,
        "guided",
    )?;
    let per_bin = (n_chains * ctx.cfg.sampler().n_steps() / bins).max(64);
    let tr_data = data_forward_trace(
        &data,
        &spec,
        &ratio,
        bins,
        per_bin,
        ctx.cfg.t_eps,
        ctx.cfg.seed ^ 0xda7a,
        "data_forward",
    )?;
    let trace_path = ctx.path("ratio_trace.csv");
    csvio::write_traces(&trace_path, &[tr_data, tr_un, tr_gd])?;

    // Endpoint W1 summary for both processes.
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed ^ 0x3ef);
    let reference = data.sample_n(n_chains, &mut rng);
    let w1_un = w1_points(&unguided.points, &reference, 64, ctx.cfg.seed ^ 0x44)?;
    let w1_gd = w1_points(&guided.points, &reference, 64, ctx.cfg.seed ^ 0x44)?;
    let w1_path = ctx.path("w1_summary.csv");
    std::fs::write(
        &w1_path,
        format!(
            "process,w1\nunguided,{}\nguided,{}\n",
            csvio::fmt_f64(w1_un),
            csvio::fmt_f64(w1_gd)
        ),
    )?;

    for p in [&report_path, &trace_path, &w1_path] {
        check_csv_written(p)?;
    }
    ctx.say(format!(
        "wrote {}, {}, {}",
        report_path.display(),
        trace_path.display(),
        w1_path.display()
    ));
    Ok(())
}

pub fn cmd_sweep(
    ctx: &Ctx,
    score_path: Option<&Path>,
    disc_path: Option<&Path>,
    oracle: bool,
    nfes_flag: Option<&[usize]>,
) -> CmdResult<()> {
    ctx.ensure_out()?;
    let spec = ctx.spec()?;
    let data = ctx.analytic_dataset()?;
    let dim = data.dim();
    let trunc = ctx.cfg.truncation;

    let nfes: Vec<usize> = match nfes_flag {
        Some(list) => {
            if list.is_empty() {
                return Err("empty NFE list".into());
            }
            list.to_vec()
        }
        None => ctx.cfg.sweep_nfes.clone(),
    };

    let score: Box<dyn Fn(&[f64], f64) -> Vec<f64>> = if oracle {
        Box::new(oracle_score_fn(data.clone(), spec.clone(), ctx.cfg.oracle_bias))
    } else {
        let path = score_path.ok_or("sweep needs --score (or --oracle)")?;
        Box::new(net_score_fn(load_head(path, HeadKind::Score)?))
    };
    let guidance: Box<dyn Fn(&[f64], f64) -> Vec<f64>> = match disc_path {
        Some(p) => {
            let net = load_head(p, HeadKind::Discriminator)?;
            Box::new(move |x: &[f64], t: f64| {
                guidance_from_discriminator(&net, x, t, trunc).expect("disc head checked")
            })
        }
        None if oracle => {
            let bias = ctx.cfg.oracle_bias;
            Box::new(move |x: &[f64], _: f64| vec![-bias; x.len()])
        }
        None => return Err("sweep needs --disc (or --oracle)".into()),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed ^ 0x5eef);
    let reference = data.sample_n(ctx.cfg.sweep_n, &mut rng);
    ctx.say(format!("sweeping NFE {nfes:?} with {} chains each", ctx.cfg.sweep_n));
    let rows = nfe_sweep(
        &spec,
        dim,
        &score,
        &guidance,
        &ctx.cfg.sampler(),
        &nfes,
        ctx.cfg.sweep_n,
        &reference,
    )?;
    let path = ctx.path("nfe_sweep.csv");
    csvio::write_sweep(&path, &rows)?;
    check_csv_written(&path)?;
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}
