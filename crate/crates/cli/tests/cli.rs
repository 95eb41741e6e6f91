//! End-to-end tests of the binary: exit codes, file round trips, and
//! determinism across seeds and worker counts.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tickcoint"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn tickcoint");
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, edit: impl Fn(String) -> String) -> std::path::PathBuf {
    let template = dir.join("template.toml");
    run_ok(bin().arg("init").arg("--out").arg(&template));
    let text = std::fs::read_to_string(&template).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, edit(text)).unwrap();
    path
}

fn csv_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn init_simulate_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "weak.toml", |s| s);
    let ticks = dir.path().join("ticks.csv");
    let stdout = run_ok(
        bin()
            .args(["simulate", "--horizon", "600", "--seed", "7"])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&ticks),
    );
    assert!(stdout.contains("asset 1:"), "{stdout}");
    assert!(stdout.contains("asset 2:"), "{stdout}");

    let lines = csv_lines(&ticks);
    assert_eq!(lines[0], "asset,time,logprice");
    assert!(lines.len() > 1000, "expected around 1200 trades");

    let report = dir.path().join("report.csv");
    let stdout = run_ok(
        bin()
            .args(["estimate", "--horizon", "600", "--delta", "1.0"])
            .arg("--input")
            .arg(&ticks)
            .arg("--out")
            .arg(&report),
    );
    assert!(stdout.contains("theta, least squares:"), "{stdout}");

    let lines = csv_lines(&report);
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    let col = header.iter().position(|h| *h == "theta_ols").unwrap();
    let theta: f64 = row[col].parse().unwrap();
    assert!(
        (theta - 1.5).abs() < 1.0,
        "least-squares estimate {theta} far from 1.5"
    );
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "weak.toml", |s| s);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        run_ok(
            bin()
                .args(["simulate", "--horizon", "200", "--seed", seed])
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(&out),
        );
        std::fs::read(&out).unwrap()
    };
    let a = run("11", "a.csv");
    let b = run("11", "b.csv");
    let c = run("12", "c.csv");
    assert_eq!(a, b, "same seed must give identical bytes");
    assert_ne!(a, c, "different seeds must give different paths");
}

#[test]
fn mc_rate_is_worker_invariant_and_env_configurable() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "clean.toml", |s| {
        s.replace("kind = \"weak\"\nh = 0.25\nc = 1.0", "kind = \"none\"")
    });
    let run = |name: &str, prep: &dyn Fn(&mut Command)| {
        let out = dir.path().join(name);
        let mut cmd = bin();
        cmd.args([
            "mc-rate",
            "--n-grid",
            "64,128",
            "--reps",
            "20",
            "--seed",
            "5",
            "--estimator",
            "ols",
        ])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .env_remove("TICKCOINT_WORKERS");
        prep(&mut cmd);
        let stdout = run_ok(&mut cmd);
        assert!(stdout.contains("log-log rmse slope:"), "{stdout}");
        std::fs::read(&out).unwrap()
    };
    let one = run("w1.csv", &|cmd| {
        cmd.args(["--workers", "1"]);
    });
    let three = run("w3.csv", &|cmd| {
        cmd.args(["--workers", "3"]);
    });
    let env = run("env.csv", &|cmd| {
        cmd.env("TICKCOINT_WORKERS", "3");
    });
    assert_eq!(one, three, "worker count must not change the rows");
    assert_eq!(one, env, "env fallback must match the flag");

    let lines: Vec<String> = String::from_utf8(one)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect();
    assert_eq!(lines[0], "experiment,n,rep,seed,estimate,scaled_error");
    assert_eq!(lines.len(), 1 + 2 * 20);
}

#[test]
fn mc_dist_reports_ks_and_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "weak.toml", |s| s);
    let rows = dir.path().join("rows.csv");
    let reference = dir.path().join("reference.csv");
    let stdout = run_ok(
        bin()
            .args([
                "mc-dist",
                "--n",
                "256",
                "--reps",
                "60",
                "--reference-draws",
                "400",
                "--grid",
                "256",
                "--seed",
                "3",
            ])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&rows)
            .arg("--reference-out")
            .arg(&reference),
    );
    let ks_line = stdout
        .lines()
        .find(|l| l.starts_with("KS statistic"))
        .expect("KS line");
    let p: f64 = ks_line
        .rsplit_once(' ')
        .unwrap()
        .1
        .parse()
        .expect("p-value parses");
    assert!((0.0..=1.0).contains(&p), "{ks_line}");
    assert_eq!(csv_lines(&rows).len(), 1 + 60);
    assert_eq!(csv_lines(&reference).len(), 1 + 400);
}

#[test]
fn mc_levels_prints_moment_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "spurious.toml", |s| {
        s.replace("theta = 1.5", "theta21 = 2.0\ntheta12 = 0.1")
            .replace("kind = \"weak\"\nh = 0.25\nc = 1.0", "kind = \"none\"")
    });
    let stdout = run_ok(
        bin()
            .args([
                "mc-levels",
                "--horizon",
                "200",
                "--reps",
                "40",
                "--seed",
                "9",
            ])
            .arg("--config")
            .arg(&config),
    );
    assert!(stdout.contains("rel err"), "{stdout}");
    assert_eq!(
        stdout.lines().filter(|l| l.trim_start().starts_with('[')).count(),
        3,
        "upper triangle of the 2x2 moment matrix:\n{stdout}"
    );
}

#[test]
fn reference_draws_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "weak.toml", |s| s);
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        run_ok(
            bin()
                .args([
                    "reference",
                    "--draws",
                    "200",
                    "--grid",
                    "128",
                    "--seed",
                    "21",
                    "--workers",
                    workers,
                ])
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(&out),
        );
        std::fs::read(&out).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "4");
    assert_eq!(a, b);
    assert_eq!(
        String::from_utf8_lossy(&a).lines().count(),
        201,
        "header plus one row per draw"
    );
}

#[test]
fn runtime_errors_exit_two_with_messages() {
    let dir = tempfile::tempdir().unwrap();

    // Typo in a config key: named in the error.
    let bad = write_config(dir.path(), "bad.toml", |s| {
        s.replace("lambda = 1.0", "lambda = 1.0\nlambada = 2.0")
    });
    let out = bin()
        .args(["simulate", "--horizon", "100"])
        .arg("--config")
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("ticks.csv"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("lambada"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // No reference law wired for this estimator/noise combination.
    let weak = write_config(dir.path(), "weak.toml", |s| s);
    let out = bin()
        .args(["reference", "--estimator", "ctaper", "--draws", "10"])
        .arg("--config")
        .arg(&weak)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("unsupported"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Missing input file.
    let out = bin()
        .args(["estimate", "--input"])
        .arg(dir.path().join("nope.csv"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);

    // A decreasing horizon grid.
    let out = bin()
        .args(["mc-rate", "--n-grid", "128,64", "--reps", "4"])
        .arg("--config")
        .arg(&weak)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("increasing"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // --delta without the ctaper estimator.
    let out = bin()
        .args([
            "mc-rate",
            "--n-grid",
            "64,128",
            "--estimator",
            "ols",
            "--delta",
            "1.0",
        ])
        .arg("--config")
        .arg(&weak)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let out = bin().arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(exit_code(&out), 1);

    let out = bin().args(["simulate"]).output().unwrap();
    assert_eq!(exit_code(&out), 1, "missing required arguments");

    let out = bin().arg("--help").output().unwrap();
    assert_eq!(exit_code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("mc-rate"));

    let out = bin().args(["mc-dist", "--help"]).output().unwrap();
    assert_eq!(exit_code(&out), 0);
}
