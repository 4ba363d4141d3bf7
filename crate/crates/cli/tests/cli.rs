//! End-to-end checks of the `dgsim` binary: artifact creation, exit codes,
//! flag validation, and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dgsim"))
}

/// A small config that keeps the pipeline fast; quality is irrelevant here.
const FAST_CONFIG: &str = "\
dataset = bimodal-1d
seed = 7
hidden_width = 16
hidden_layers = 2
time_embed = 8
score_steps = 150
score_batch = 32
disc_steps = 150
disc_batch = 32
disc_fake_n = 256
nfe = 8
n_samples = 64
eval_n = 200
trace_bins = 8
sweep_nfes = 4,8
sweep_n = 100
";

struct Env {
    dir: tempfile::TempDir,
    config: PathBuf,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("run.cfg");
        std::fs::write(&config, FAST_CONFIG).unwrap();
        Env { dir, config }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, out: &Path, args: &[&str]) -> Output {
        bin()
            .arg("--config")
            .arg(&self.config)
            .arg("--out")
            .arg(out)
            .arg("--quiet")
            .args(args)
            .output()
            .expect("binary runs")
    }

    fn run_ok(&self, out: &Path, args: &[&str]) -> Output {
        let output = self.run(out, args);
        assert!(
            output.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        output
    }
}

fn file_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn train_score_writes_reloadable_artifacts() {
    let env = Env::new();
    let out = env.out("a");
    env.run_ok(&out, &["train-score"]);
    let net = dgsim::nets::load_params(out.join("score.net")).unwrap();
    assert_eq!(net.arch.head, dgsim::nets::HeadKind::Score);
    assert_eq!(net.arch.data_dim, 1);
    let loss = std::fs::read_to_string(out.join("score_loss.csv")).unwrap();
    assert!(loss.lines().count() == 151); // header + steps
}

#[test]
fn train_score_deterministic_across_runs() {
    let env = Env::new();
    let (a, b) = (env.out("a"), env.out("b"));
    env.run_ok(&a, &["train-score"]);
    env.run_ok(&b, &["train-score"]);
    assert_eq!(file_bytes(&a.join("score.net")), file_bytes(&b.join("score.net")));
    assert_eq!(file_bytes(&a.join("score_loss.csv")), file_bytes(&b.join("score_loss.csv")));
}

#[test]
fn missing_dataset_fails_with_message() {
    let env = Env::new();
    let config = env.dir.path().join("bad.cfg");
    std::fs::write(&config, "dataset = csv:/nonexistent/points.csv\n").unwrap();
    let output = bin()
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(env.out("x"))
        .arg("train-score")
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("nonexistent"), "stderr: {err}");
}

#[test]
fn unknown_config_key_names_line() {
    let env = Env::new();
    let config = env.dir.path().join("bad.cfg");
    std::fs::write(&config, "seed = 1\nbogus_key = 2\n").unwrap();
    let output = bin()
        .arg("--config")
        .arg(&config)
        .arg("train-score")
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("line 2") && err.contains("bogus_key"), "stderr: {err}");
}

#[test]
fn full_pipeline_and_guidance_flags() {
    let env = Env::new();
    let out = env.out("pipe");
    env.run_ok(&out, &["train-score"]);
    let score = out.join("score.net");
    let score_s = score.to_str().unwrap();

    env.run_ok(&out, &["train-disc", "--score", score_s]);
    let disc = out.join("disc.net");
    let disc_s = disc.to_str().unwrap();
    assert!(disc.exists() && out.join("disc_loss.csv").exists());
    assert!(out.join("disc_fakes.csv").exists());

    // Plain sampling writes one row per chain plus a header.
    env.run_ok(&out, &["sample", "--score", score_s]);
    let rows = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(rows.lines().count(), 65);

    // Guidance without a discriminator is a usage error.
    let output = env.run(&out, &["sample", "--score", score_s, "--guided"]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("discriminator"));

    // Guided sampling with the trained discriminator succeeds.
    env.run_ok(&out, &["sample", "--score", score_s, "--disc", disc_s, "--guided"]);

    // Rejection without a judge is rejected; with one it prints the rate.
    let output = env.run(&out, &["sample", "--score", score_s, "--rejection"]);
    assert!(!output.status.success());
    let output = env.run_ok(
        &out,
        &["sample", "--score", score_s, "--disc", disc_s, "--rejection"],
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    let rate_line = stdout
        .lines()
        .find(|l| l.starts_with("acceptance_rate = "))
        .expect("acceptance rate printed");
    let alpha: f64 = rate_line.trim_start_matches("acceptance_rate = ").parse().unwrap();
    assert!(alpha > 0.0 && alpha <= 1.0, "alpha {alpha}");

    // Trace writes trajectories with strictly decreasing times per chain.
    env.run_ok(&out, &["sample", "--score", score_s, "--trace"]);
    let traj = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert!(traj.lines().count() > 64 * 8);
    assert!(traj.starts_with("chain_id,step,t,sigma,x0"));
}

#[test]
fn guided_with_zero_weight_disc_matches_unguided_bytes() {
    let env = Env::new();
    let out = env.out("zero");
    env.run_ok(&out, &["train-score"]);
    let score = out.join("score.net");
    let score_s = score.to_str().unwrap();

    // A freshly zero-initialized discriminator outputs exactly 1/2.
    let arch = dgsim::nets::Arch {
        data_dim: 1,
        hidden: vec![16, 16],
        time_embed: 8,
        head: dgsim::nets::HeadKind::Discriminator,
    };
    let zero = dgsim::nets::NetParams::zeros(arch).unwrap();
    let zero_path = out.join("zero_disc.net");
    dgsim::nets::save_params(&zero, &zero_path).unwrap();

    let a = env.out("plain_run");
    env.run_ok(&a, &["sample", "--score", score_s]);
    let b = env.out("guided_run");
    env.run_ok(
        &b,
        &["sample", "--score", score_s, "--disc", zero_path.to_str().unwrap(), "--guided"],
    );
    assert_eq!(file_bytes(&a.join("samples.csv")), file_bytes(&b.join("samples.csv")));
}

#[test]
fn oracle_mode_rejection_and_sweep() {
    let env = Env::new();
    let out = env.out("oracle");
    let output = env.run_ok(&out, &["sample", "--oracle", "--rejection"]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    // The oracle judge between identical distributions sits on the
    // boundary, which counts as accepted.
    assert!(stdout.contains("acceptance_rate = 1.0"), "stdout: {stdout}");

    env.run_ok(&out, &["sweep", "--oracle"]);
    let sweep = std::fs::read_to_string(out.join("nfe_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3); // header + 2 configured NFEs
    assert!(sweep.starts_with("nfe,w1_unguided,w1_guided"));

    let output = env.run(&out, &["sweep", "--oracle", "--nfes", ""]);
    assert!(!output.status.success());
}

#[test]
fn eval_writes_reports_deterministically() {
    let env = Env::new();
    let out = env.out("eval");
    env.run_ok(&out, &["train-score"]);
    let score_s = out.join("score.net");
    env.run_ok(&out, &["train-disc", "--score", score_s.to_str().unwrap()]);
    let disc_s = out.join("disc.net");

    let run_eval = |dir: &Path| {
        env.run_ok(
            dir,
            &[
                "eval",
                "--score",
                score_s.to_str().unwrap(),
                "--disc",
                disc_s.to_str().unwrap(),
            ],
        );
    };
    let (a, b) = (env.out("eval_a"), env.out("eval_b"));
    run_eval(&a);
    run_eval(&b);
    for f in ["error_report.txt", "ratio_trace.csv", "w1_summary.csv"] {
        assert!(a.join(f).exists(), "{f} missing");
        assert_eq!(file_bytes(&a.join(f)), file_bytes(&b.join(f)), "{f} differs");
    }
    let report = std::fs::read_to_string(a.join("error_report.txt")).unwrap();
    for key in ["e_pri=", "e_est=", "e_sol=", "w1_total="] {
        assert!(report.contains(key), "report missing {key}: {report}");
    }
}

#[test]
fn out_dir_env_variable_is_fallback() {
    let env = Env::new();
    let target = env.out("from_env");
    let output = bin()
        .arg("--config")
        .arg(&env.config)
        .arg("--quiet")
        .env("DGSIM_OUT", &target)
        .args(["sample", "--oracle"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(target.join("samples.csv").exists());
}
