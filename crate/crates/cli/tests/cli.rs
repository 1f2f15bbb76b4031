use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qrel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrel")).args(args).current_dir(dir).env_remove("QREL_THREADS").output().unwrap()
}

fn config(dir: &Path, json: &str) -> String {
    let p = dir.join("scenario.json");
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_owned()
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_group_passes() {
    let dir = TempDir::new().unwrap();
    let out = qrel(&["verify", "--suite", "group", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rep = json(&dir.path().join("o/report.json"));
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["suites"][0]["name"], "group");
    for c in rep["suites"][0]["criteria"][0]["checks"].as_array().unwrap() {
        assert!(c["tolerance"].is_number());
        assert!(c["source"].is_string());
    }
}

#[test]
fn literal_convention_is_informational() {
    let dir = TempDir::new().unwrap();
    let out = qrel(&["verify", "--suite", "group", "--convention", "paper-literal", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rep = json(&dir.path().join("o/report.json"));
    assert_eq!(rep["convention"], "paper-literal");
    let checks: Vec<_> = rep["suites"][0]["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|c| c["checks"].as_array().unwrap().clone())
        .collect();
    assert!(checks.iter().any(|c| c["kind"] == "informational" && c["pass"] == false));
    assert!(checks.iter().all(|c| c["kind"] == "informational" || c["pass"] == true));
}

#[test]
fn bad_grid_exits_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), r#"{"grid": {"n": 500}}"#);
    let out = qrel(&["verify", "--config", &cfg, "--suite", "group"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`grid.n`"));
}

#[test]
fn other_config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    for bad in [
        r#"{"units": {"mass": 0}}"#,
        r#"{"step": 0.3, "duration": 1}"#,
        r#"{"initial": {"samples": "missing.csv"}}"#,
        r#"{"flow": "sideways"}"#,
        r#"{"grid": {"n": "many"}}"#,
    ] {
        let cfg = config(dir.path(), bad);
        let out = qrel(&["evolve", "--config", &cfg], dir.path());
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
    assert_eq!(qrel(&["verify", "--suite", "everything"], dir.path()).status.code(), Some(2));
    assert_eq!(qrel(&["transform", "--convention", "loose"], dir.path()).status.code(), Some(2));
    assert_eq!(qrel(&["frobnicate"], dir.path()).status.code(), Some(2));
    let threads = Command::new(env!("CARGO_BIN_EXE_qrel"))
        .args(["transform", "--out", "o"])
        .current_dir(dir.path())
        .env("QREL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn tau_evolution_has_monotone_action() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), r#"{"flow": "tau-flow", "step": 0.001, "duration": 0.5, "record_every": 10}"#);
    let out = qrel(&["evolve", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = table(&dir.path().join("o/trajectory.csv"));
    assert_eq!(rows.len(), 51);
    let s = column(&header, &rows, "s_gen");
    assert!(s.windows(2).all(|w| w[1] > w[0]), "{s:?}");
    let t = column(&header, &rows, "time");
    assert!((t[50] - 0.5).abs() < 1e-12);
    let summary = json(&dir.path().join("o/summary.json"));
    assert_eq!(summary["completed"], true);
    assert_eq!(summary["last_valid_record"], 50);
}

#[test]
fn t_evolution_keeps_delta_p2() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), r#"{"flow": "t", "step": 0.25, "duration": 4}"#);
    let out = qrel(&["evolve", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = table(&dir.path().join("o/trajectory.csv"));
    assert_eq!(rows.len(), 17);
    let dp = column(&header, &rows, "delta_p2_q");
    assert!(dp.iter().all(|v| (v - dp[0]).abs() < 1e-12), "{dp:?}");
    assert!(column(&header, &rows, "norm").iter().all(|n| (n - 1.0).abs() < 1e-14));
}

#[test]
fn zero_duration_gives_one_record_and_exact_header() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), r#"{"duration": 0}"#);
    let out = qrel(&["evolve", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("o/trajectory.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "step,time,h_q,k_q,s_gen,delta_x2,delta_p2_q,norm,continuity_residual");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,0.0000000000000000e0,"));
}

#[test]
fn guard_trip_exits_1_with_last_record() {
    // sigma2 = 2, b = 1 outgrows the noise filter near tau = 0.1
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        r#"{"initial": {"gaussian": {"sigma2": 2, "b": 1}}, "step": 0.001, "duration": 0.4}"#,
    );
    let out = qrel(&["evolve", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("last valid record index"));
    let summary = json(&dir.path().join("o/summary.json"));
    assert_eq!(summary["completed"], false);
    let (_, rows) = table(&dir.path().join("o/trajectory.csv"));
    assert_eq!(summary["last_valid_record"].as_u64().unwrap() as usize, rows.len() - 1);
}

#[test]
fn transform_identity_row_is_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), r#"{"alphas": [0]}"#);
    let out = qrel(&["transform", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = table(&dir.path().join("o/transform.csv"));
    assert_eq!(rows.len(), 1);
    for name in header.iter().filter(|h| h.starts_with("res_") || *h == "max_residual") {
        assert_eq!(column(&header, &rows, name)[0], 0.0, "{name}");
    }
}

#[test]
fn transform_ln4_on_minimal_state() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), &format!(r#"{{"alphas": [{}]}}"#, 4f64.ln()));
    qrel(&["transform", "--config", &cfg, "--out", "o"], dir.path());
    let (header, rows) = table(&dir.path().join("o/transform.csv"));
    assert!((column(&header, &rows, "dx2")[0] - 0.25).abs() < 1e-10);
    assert!((column(&header, &rows, "dp2")[0] - 1.0).abs() < 1e-10);
    assert!(column(&header, &rows, "max_residual")[0] < 1e-10);
}

#[test]
fn transform_default_sweep_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), r#"{"initial": {"gaussian": {"sigma2": 1, "b": 1, "p0": 0}}}"#);
    let out = qrel(&["transform", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let summary = json(&dir.path().join("o/summary.json"));
    assert_eq!(summary["alphas"], 13);
    assert!(summary["max_residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(summary["within_tolerance"], true);
}

#[test]
fn samples_file_matches_gaussian() {
    let dir = TempDir::new().unwrap();
    let n = 256;
    let (l, s2) = (40.0f64, 1.0f64);
    let mut csv = String::from("re,im\n");
    for j in 0..n {
        let x = -l / 2.0 + l * j as f64 / n as f64;
        let amp = ((2.0 * std::f64::consts::PI * s2).powf(-0.5) * (-x * x / (2.0 * s2)).exp()).sqrt();
        csv.push_str(&format!("{:e},0\n", amp));
    }
    fs::write(dir.path().join("psi.csv"), csv).unwrap();
    let cfg = config(
        dir.path(),
        &format!(r#"{{"grid": {{"n": {n}}}, "initial": {{"samples": "psi.csv"}}, "alphas": [{}]}}"#, 4f64.ln()),
    );
    let out = qrel(&["transform", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = table(&dir.path().join("o/transform.csv"));
    assert!((column(&header, &rows, "dx2")[0] - 0.25).abs() < 1e-8);
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path(), r#"{"step": 0.001, "duration": 0.02}"#);
    for out in ["a", "b"] {
        assert_eq!(qrel(&["evolve", "--config", &cfg, "--out", out], dir.path()).status.code(), Some(0));
        assert_eq!(qrel(&["transform", "--config", &cfg, "--out", &format!("{out}t")], dir.path()).status.code(), Some(0));
        assert_eq!(qrel(&["verify", "--suite", "group", "--out", &format!("{out}v")], dir.path()).status.code(), Some(0));
    }
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/trajectory.csv"), read("b/trajectory.csv"));
    assert_eq!(read("a/summary.json"), read("b/summary.json"));
    assert_eq!(read("at/transform.csv"), read("bt/transform.csv"));
    assert_eq!(read("av/report.json"), read("bv/report.json"));
}
