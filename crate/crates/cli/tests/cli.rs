use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ordsel::io::{read_columns, write_dataset};
use ordsel::simulation::{generate, ScenarioSpec};
use serde_json::Value;
use tempfile::TempDir;

fn ordsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordsel")).args(args).env_remove("ORDSEL_THREADS").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn digests(dir: &Path) -> Vec<(String, String)> {
    let m = json(&dir.join("manifest.json"));
    m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["path"].as_str().unwrap().to_owned(), o["sha256"].as_str().unwrap().to_owned()))
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn toy_csv(dir: &Path, replicate: u64) -> PathBuf {
    let (data, _) = generate(&ScenarioSpec::toy(2024), replicate).unwrap();
    let path = dir.join("toy.csv");
    write_dataset(&data, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

#[test]
fn simulate_writes_curve_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "sim.json", r#"{"scenario": {"preset": "toy"}, "k_grid": [2, 6], "replicates": 300, "seed": 7}"#);
    let out = tmp.path().join("out");
    let res = ordsel(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let (header, cols) = read_columns(std::fs::File::open(out.join("curve.csv")).unwrap()).unwrap();
    assert_eq!(header, ["K", "fdr", "fdr_ci", "pr", "pr_ci", "mean_dim"]);
    assert_eq!(cols[0], vec![2.0, 6.0]);
    assert!(cols[1][1] < cols[1][0]);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 7);
    assert!(manifest["wall_time_ms"].is_u64());
    let names: Vec<String> = digests(&out).into_iter().map(|d| d.0).collect();
    assert_eq!(names, ["curve.csv", "curve.json"]);
}

#[test]
fn simulate_is_reproducible_and_thread_independent() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "sim.json", r#"{"scenario": {"preset": "noise", "sigma2": 4}, "replicates": 50}"#);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert_eq!(code(&ordsel(&["simulate", "--config", s(&cfg), "--out", s(&a), "--seed", "3"])), 0);
    assert_eq!(code(&ordsel(&["simulate", "--config", s(&cfg), "--out", s(&b), "--seed", "3", "--threads", "1"])), 0);
    let env = Command::new(env!("CARGO_BIN_EXE_ordsel"))
        .args(["simulate", "--config", s(&cfg), "--out", s(&c), "--seed", "3"])
        .env("ORDSEL_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&env), 0);
    assert_eq!(digests(&a), digests(&b));
    assert_eq!(digests(&a), digests(&c));
    assert_eq!(json(&a.join("manifest.json"))["seed"], 3);
}

#[test]
fn simulate_rejects_zero_replicates() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "sim.json", r#"{"scenario": {"preset": "toy"}, "replicates": 0}"#);
    let res = ordsel(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&res), 2);
}

#[test]
fn malformed_config_reports_position() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "sim.json", "{\n  \"scenario\": {\"preset\": \"toy\"},\n  \"replicates\": ,\n}");
    let res = ordsel(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&res), 2);
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn missing_subcommand_arguments_exit_2() {
    assert_eq!(code(&ordsel(&["simulate"])), 2);
    assert_eq!(code(&ordsel(&["frobnicate"])), 2);
}

#[test]
fn bounds_sandwich_and_decay_on_toy_truth() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "bounds.json",
        r#"{"input": {"scenario": {"preset": "toy"}}, "k_grid": {"start": 2, "stop": 10, "step": 1}, "mc_samples": 2000, "seed": 5}"#,
    );
    let out = tmp.path().join("out");
    let res = ordsel(&["bounds", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let (header, cols) = read_columns(std::fs::File::open(out.join("bounds.csv")).unwrap()).unwrap();
    assert_eq!(header, ["K", "b", "B", "floor", "b_mc_err", "B_mc_err"]);
    assert_eq!(cols[0].len(), 9);
    for i in 0..cols[0].len() {
        let (b, upper, floor) = (cols[1][i], cols[2][i], cols[3][i]);
        assert!(floor <= b && b <= upper, "K={}: floor {floor}, b {b}, B {upper}", cols[0][i]);
    }
    assert!(cols[2][8] < cols[2][0]);
}

#[test]
fn bounds_saturated_input_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bounds.json", r#"{"input": {"beta": [3, 2, 1], "sigma2": 1, "q": 3}}"#);
    assert_eq!(code(&ordsel(&["bounds", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))])), 3);
}

#[test]
fn calibrate_toy_dataset() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path(), 0);
    let cfg = write(tmp.path(), "cal.json", r#"{"alpha": 0.05, "gamma": 0.1, "mc_samples": 2000}"#);
    let out = tmp.path().join("out");
    let res = ordsel(&["calibrate", "--data", s(&data), "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let cal = json(&out.join("calibration.json"));
    let k = cal["result"]["k_star"].as_f64().unwrap();
    assert!((2.0..=10.0).contains(&k));
    assert!(cal["result"]["bound_at_k"].as_f64().unwrap() < 0.05);
    let dim = cal["selected"]["dim"].as_u64().unwrap();
    assert!((5..=20).contains(&dim), "dim {dim}");
    let sel = std::fs::read_to_string(out.join("selected_model.csv")).unwrap();
    assert_eq!(sel.lines().count(), 51);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["data_path"], s(&data));
}

#[test]
fn calibrate_tiny_alpha_exits_4_with_curve() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path(), 1);
    let cfg = write(tmp.path(), "cal.json", r#"{"alpha": 1e-9, "mc_samples": 1000}"#);
    let out = tmp.path().join("out");
    let res = ordsel(&["calibrate", "--data", s(&data), "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&res), 4);
    assert!(out.join("bounds.csv").exists());
    assert!(json(&out.join("calibration_failed.json"))["curve"]["upper"].is_array());
    assert_eq!(digests(&out).len(), 2);
}

#[test]
fn calibrate_vacuous_gamma_returns_min_i1() {
    let tmp = TempDir::new().unwrap();
    let data = toy_csv(tmp.path(), 2);
    let cfg = write(tmp.path(), "cal.json", r#"{"gamma": 1e9, "mc_samples": 1000}"#);
    let out = tmp.path().join("out");
    assert_eq!(code(&ordsel(&["calibrate", "--data", s(&data), "--config", s(&cfg), "--out", s(&out)])), 0);
    let r = &json(&out.join("calibration.json"))["result"];
    assert_eq!(r["fallback_used"], false);
    assert_eq!(r["k_star"], r["i1_intervals"][0]["lo"]);
}

#[test]
fn calibrate_bad_data_exits_2() {
    let tmp = TempDir::new().unwrap();
    let data = write(tmp.path(), "bad.csv", "y,x1\n1,2\n3,oops\n");
    let cfg = write(tmp.path(), "cal.json", "{}");
    let res = ordsel(&["calibrate", "--data", s(&data), "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("row 3"));
}

const VERIFY_REF: &str = r#"{"beta": [3, 2, 1], "sigma2": 1, "q": 8, "samples": 20000, "mc_samples": 20000, "seed": 11}"#;

#[test]
fn verify_reference_instance_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "verify.json", VERIFY_REF);
    let out = tmp.path().join("out");
    let res = ordsel(&["verify", "--config", s(&cfg), "--out", s(&out)]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(code(&res), 0, "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.ends_with(" ok")).count(), 4);
    assert_eq!(json(&out.join("verify.json"))["pass"], true);
}

#[test]
fn verify_detects_corrupted_pr() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "verify.json", VERIFY_REF);
    let res = ordsel(&["verify", "--config", s(&cfg), "--fault-pr-scale", "0.5"]);
    assert_eq!(code(&res), 5, "{}", String::from_utf8_lossy(&res.stdout));
    assert!(String::from_utf8_lossy(&res.stdout).contains("MISMATCH"));
}

#[test]
fn verify_boundary_instance_has_one_term() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "verify.json",
        r#"{"beta": [4, 3, 2, 1.5, 1, 1, 0.8], "sigma2": 1, "q": 8, "samples": 20000, "mc_samples": 20000}"#,
    );
    let out = tmp.path().join("out");
    let res = ordsel(&["verify", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    for row in json(&out.join("verify.json"))["rows"].as_array().unwrap() {
        assert_eq!(row["terms"], 1);
    }
}

#[test]
fn verify_rejects_large_instances() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "verify.json", r#"{"beta": [1], "sigma2": 1, "q": 50}"#);
    assert_eq!(code(&ordsel(&["verify", "--config", s(&cfg)])), 2);
}
