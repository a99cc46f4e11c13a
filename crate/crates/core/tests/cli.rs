use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ofu_lqg::riccati::ControllerSynthesis;

const BIN: &str = env!("CARGO_BIN_EXE_ofu-lqg");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_scalar(dir: &Path, a: f64, c: f64) -> String {
    let path = dir.join(format!("sys_{a}_{c}.json"));
    fs::write(
        &path,
        format!(
            r#"{{"n": 1, "m": 1, "p": 1, "A": [[{a}]], "B": [[1.0]], "C": [[{c}]], "sigma_w": 1.0, "sigma_z": 1.0}}"#
        ),
    )
    .unwrap();
    path.display().to_string()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn simulate_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_scalar(dir.path(), 0.5, 1.0);
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let o = run(&["simulate", "--system", &sys, "--T", "10", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read_to_string(out1.join("trajectory.csv")).unwrap();
    let b = fs::read_to_string(out2.join("trajectory.csv")).unwrap();
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "t,u_0,y_0");
    assert_eq!(lines.len(), 11);
}

#[test]
fn missing_system_file_exits_one_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--system", "/no/such/sys.json", "--T", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("/no/such/sys.json"), "{err}");
}

#[test]
fn dare_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_scalar(dir.path(), 0.5, 1.0);
    let o = run(&["dare", "--system", &sys, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let s: ControllerSynthesis =
        serde_json::from_str(&fs::read_to_string(dir.path().join("synthesis.json")).unwrap()).unwrap();
    let root = (0.25 + 4.0625f64.sqrt()) / 2.0;
    assert!((s.P[(0, 0)] - root).abs() < 1e-8);
    assert!((s.L[(0, 0)] - root / (root + 1.0)).abs() < 1e-8);

    let zero = write_scalar(dir.path(), 0.0, 1.0);
    let out = dir.path().join("zero");
    assert!(run(&["dare", "--system", &zero, "--out", out.to_str().unwrap()]).status.success());
    let s: ControllerSynthesis =
        serde_json::from_str(&fs::read_to_string(out.join("synthesis.json")).unwrap()).unwrap();
    assert!((s.P[(0, 0)] - 1.0).abs() < 1e-12);
    assert!(s.K[(0, 0)].abs() < 1e-12);
    assert!((s.L[(0, 0)] - 0.5).abs() < 1e-12);
    assert!((s.J_star - 2.0).abs() < 1e-12);
}

#[test]
fn unobservable_dare_exits_two_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_scalar(dir.path(), 0.5, 0.0);
    let o = run(&["dare", "--system", &sys, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(report["exit_code"], 2);
}

#[test]
fn run_single_trial_writes_regret_rows() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_scalar(dir.path(), 0.5, 1.0);
    let cfg = write_config(dir.path(), r#"{"T": 2000, "n_declared": 1, "radius_scale": 0.0025}"#);
    let out = dir.path().join("run");
    let o = run(&["run", "--system", &sys, "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("regret.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,cost,cumulative_regret"));
    assert_eq!(csv.lines().count(), 2001);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(report["steps"], 2000);
}

#[test]
fn ensemble_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_scalar(dir.path(), 0.5, 1.0);
    let cfg = write_config(dir.path(), r#"{"T": 1000, "n_declared": 1, "radius_scale": 0.0025}"#);
    let mut outputs = Vec::new();
    for (name, threads) in [("x", "1"), ("y", "3")] {
        let out = dir.path().join(name);
        let o = Command::new(BIN)
            .env("OFU_LQG_THREADS", threads)
            .args(["run", "--system", &sys, "--config", &cfg, "--trials", "8", "--seed", "3", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read_to_string(out.join("ensemble.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].lines().next(), Some("t,mean,median,q10,q90"));
}

#[test]
fn sweep_writes_slope() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_scalar(dir.path(), 0.5, 1.0);
    let cfg = write_config(dir.path(), r#"{"T": 1000, "n_declared": 1, "radii_mode": "oracle"}"#);
    let out = dir.path().join("sweep");
    let o = run(&[
        "sweep", "--system", &sys, "--config", &cfg, "--T", "1e4", "--T", "3e4", "--T", "1e5",
        "--trials", "2", "--calibrate", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let slope: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("slope.json")).unwrap()).unwrap();
    assert!(slope["slope"].as_f64().unwrap().is_finite());
    for t in [10000, 30000, 100000] {
        assert!(out.join(format!("ensemble_T{t}.csv")).exists());
    }
}

#[test]
fn identify_from_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_scalar(dir.path(), 0.5, 1.0);
    let cfg = write_config(dir.path(), r#"{"T": 5000, "n_declared": 1}"#);
    let sim = dir.path().join("sim");
    assert!(run(&["simulate", "--system", &sys, "--T", "3000", "--out", sim.to_str().unwrap()]).status.success());
    let traj = sim.join("trajectory.csv");
    let out = dir.path().join("id");
    let o = run(&[
        "identify", "--system", &sys, "--config", &cfg, "--trajectory", traj.to_str().unwrap(),
        "--radii-mode", "oracle", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let id: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("identified.json")).unwrap()).unwrap();
    let a_hat = id["model"]["a_hat"][0][0].as_f64().unwrap();
    assert!((a_hat - 0.5).abs() < 0.15, "a_hat = {a_hat}");
    assert_eq!(id["radii"]["mode"], "oracle");
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(run(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
