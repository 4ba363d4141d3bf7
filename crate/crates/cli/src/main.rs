//! Experiment driver: train the score network and discriminator, draw
//! guided/unguided/rejection samples, and evaluate against the analytic
//! oracles, all from one flat config file.

use clap::{Parser, Subcommand};
use dgsim_cli::commands::{
    cmd_eval, cmd_sample, cmd_sweep, cmd_train_disc, cmd_train_score, CmdResult, Ctx, SampleFlags,
};
use dgsim_cli::config::{parse_config, RunConfig};
use std::path::PathBuf;

/// Environment variable holding the default output root.
const OUT_ENV: &str = "DGSIM_OUT";

#[derive(Parser)]
#[command(name = "dgsim", version, about = "Score-based diffusion sampling with discriminator guidance on analytic toy targets")]
struct Cli {
    /// Flat key=value config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides config `out_dir` and DGSIM_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the score network on the configured dataset.
    TrainScore,
    /// Generate frozen fake samples with a trained score network, then
    /// train the discriminator against them.
    TrainDisc {
        /// Trained score parameters.
        #[arg(long)]
        score: PathBuf,
    },
    /// Draw samples from the configured solver.
    Sample {
        /// Trained score parameters (not needed with --oracle).
        #[arg(long)]
        score: Option<PathBuf>,
        /// Trained discriminator parameters.
        #[arg(long)]
        disc: Option<PathBuf>,
        /// Add discriminator (or oracle) guidance to the drift.
        #[arg(long)]
        guided: bool,
        /// Keep only samples the discriminator accepts; prints the rate.
        #[arg(long)]
        rejection: bool,
        /// Use the analytic score of the dataset (plus `oracle_bias`).
        #[arg(long)]
        oracle: bool,
        /// Also write per-chain trajectories.
        #[arg(long)]
        trace: bool,
    },
    /// Error decomposition, log-ratio traces and a W1 summary.
    Eval {
        #[arg(long)]
        score: PathBuf,
        #[arg(long)]
        disc: PathBuf,
    },
    /// Endpoint quality versus NFE for unguided and guided sampling.
    Sweep {
        #[arg(long)]
        score: Option<PathBuf>,
        #[arg(long)]
        disc: Option<PathBuf>,
        /// Use the analytic (optionally biased) score and gap guidance.
        #[arg(long)]
        oracle: bool,
        /// Comma-separated NFE list; defaults to the config's sweep_nfes.
        #[arg(long, value_delimiter = ',')]
        nfes: Option<Vec<usize>>,
    },
}

fn build_ctx(cli: &Cli) -> CmdResult<Ctx> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var(OUT_ENV).ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Ctx { cfg, out, quiet: cli.quiet })
}

fn run(cli: Cli) -> CmdResult<()> {
    let ctx = build_ctx(&cli)?;
    match &cli.cmd {
        Cmd::TrainScore => cmd_train_score(&ctx),
        Cmd::TrainDisc { score } => cmd_train_disc(&ctx, score),
        Cmd::Sample { score, disc, guided, rejection, oracle, trace } => cmd_sample(
            &ctx,
            score.as_deref(),
            disc.as_deref(),
            &SampleFlags {
                guided: *guided,
                rejection: *rejection,
                oracle: *oracle,
                trace: *trace,
            },
        ),
        Cmd::Eval { score, disc } => cmd_eval(&ctx, score, disc),
        Cmd::Sweep { score, disc, oracle, nfes } => {
            cmd_sweep(&ctx, score.as_deref(), disc.as_deref(), *oracle, nfes.as_deref())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
