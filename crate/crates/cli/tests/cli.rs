use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use logweight::construction::ConstructionState;
use logweight::series::{modulus_sum, split_parity};
use logweight::Complex64;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logweight"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON report")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Ramey–Ullrich state with h = 2, t0 = 0.95, t_stop = 0.9999.
fn state(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("s.json");
    let o = run(&[
        "construct",
        "--family",
        "ramey_ullrich",
        "--h",
        "2",
        "--t0",
        "0.95",
        "--t-stop",
        "0.9999",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn construct_writes_a_state() {
    let o = run(&[
        "construct",
        "--family",
        "ramey_ullrich",
        "--h",
        "2",
        "--t0",
        "0.95",
        "--t-stop",
        "0.9999",
    ]);
    assert_eq!(code(&o), 0);
    let s = ConstructionState::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert!(s.ts().last().unwrap() > &0.9999);
    assert_eq!(s.weight.unwrap().family, "ramey_ullrich");
}

#[test]
fn construct_rejects_bad_parameters() {
    let o = run(&["construct", "--family", "ramey_ullrich", "--h", "1"]);
    assert_eq!(code(&o), 2);
    assert!(json(&o)["error"].as_str().unwrap().contains("h must be at least 2"));

    let o = run(&["construct", "--no-such-flag"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"));

    let o = run(&["construct"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn tabulated_weight_fails_the_convexity_gate() {
    let dir = TempDir::new().unwrap();
    let table: Vec<[f64; 2]> = [0.5, 0.8, 0.9, 0.95, 0.99, 0.999, 0.9999, 0.99999]
        .iter()
        .map(|&t| [t, 1.0 / (1.0 - t)])
        .collect();
    let path = dir.path().join("bad_nonconvex.json");
    fs::write(&path, serde_json::to_string(&table).unwrap()).unwrap();
    let o = run(&[
        "construct",
        "--family",
        "tabulated",
        "--table",
        p(&path),
        "--t0",
        "0.95",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not strictly convex"), "{}", stderr(&o));
}

#[test]
fn sandwich_passes_on_the_full_grid() {
    let dir = TempDir::new().unwrap();
    let s = state(&dir);
    let o = run(&[
        "verify",
        "sandwich",
        "--state",
        p(&s),
        "--family",
        "ramey_ullrich",
        "--t-points",
        "2000",
        "--angles",
        "256",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&o);
    assert_eq!(r["passed"], true);
    assert_eq!(r["sandwich"]["t_points"], 2000);
}

#[test]
fn sandwich_with_adjustment_reports_constants() {
    let dir = TempDir::new().unwrap();
    let s = state(&dir);
    let o = run(&[
        "verify",
        "sandwich",
        "--state",
        p(&s),
        "--t-points",
        "50",
        "--angles",
        "32",
        "--adjust",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let adj = &json(&o)["adjusted"];
    assert!(adj["c_low"].as_f64().unwrap() > 0.0);
    assert!(adj["c_high"].as_f64().unwrap().is_finite());
}

#[test]
fn lemmas_pass_and_foreign_weights_are_rejected() {
    let dir = TempDir::new().unwrap();
    let s = state(&dir);
    let o = run(&["verify", "lemmas", "--state", p(&s), "--samples", "50", "--delta", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["lemmas"]["passed"], true);

    let o = run(&[
        "verify",
        "lemmas",
        "--state",
        p(&s),
        "--family",
        "exp_power",
        "--params",
        "1",
    ]);
    assert_eq!(code(&o), 2);
    assert!(json(&o)["error"].is_string());
}

#[test]
fn envelope_decides() {
    let o = run(&["verify", "envelope", "--family", "perturbed_unbounded_sawtooth"]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    assert_eq!(r["envelope"]["equivalent"], false);
    assert!(r["envelope"]["gap"].as_f64().unwrap() > 10.0);

    let o = run(&["verify", "envelope", "--family", "perturbed_bump", "--params", "3"]);
    assert_eq!(code(&o), 0);
    let gap = json(&o)["envelope"]["gap"].as_f64().unwrap();
    assert!((gap - 3.0).abs() < 1e-3, "{gap}");

    let o = run(&["verify", "envelope", "--family", "ramey_ullrich"]);
    assert_eq!(code(&o), 0);
    assert!(json(&o)["envelope"]["gap"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn hadamard_suite_passes() {
    let o = run(&["verify", "hadamard", "--random-polys", "100", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["polynomials"].as_array().unwrap().len(), 100);
}

#[test]
fn ball_checks() {
    let dir = TempDir::new().unwrap();
    let s = state(&dir);
    let o = run(&[
        "verify",
        "ball",
        "--state",
        p(&s),
        "--t-points",
        "100",
        "--sphere-samples",
        "64",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["lower_bound"]["passed"], true);

    let m = dir.path().join("coord.json");
    fs::write(&m, r#"{"d": 2, "Q": 2, "delta": 0.5, "kind": "coordinate"}"#).unwrap();
    let o = run(&["verify", "ball", "--manifest", p(&m), "--degrees", "8"]);
    assert_eq!(code(&o), 1);
    let mm = json(&o)["family"]["degrees"][0]["min_max"].as_f64().unwrap();
    assert!((mm - 0.0625).abs() < 1e-12);

    let small = dir.path().join("small.json");
    fs::write(&small, r#"{"d": 1, "Q": 1, "delta": 0.01, "kind": "monomial"}"#).unwrap();
    let o = run(&["verify", "ball", "--state", p(&s), "--manifest", p(&small)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("precondition"));
}

#[test]
fn emit_writes_the_grid() {
    let dir = TempDir::new().unwrap();
    let s = state(&dir);
    let csv_path = dir.path().join("grid.csv");
    let o = run(&[
        "emit",
        "--state",
        p(&s),
        "--t-points",
        "10",
        "--angles",
        "4",
        "--out",
        p(&csv_path),
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "t,theta,log_g1_abs,log_g2_abs,log_sum,log_omega,lower_margin,upper_margin"
    );
    assert_eq!(lines.len(), 41);

    let state = ConstructionState::from_json(&fs::read_to_string(&s).unwrap()).unwrap();
    let pair = split_parity(&state).unwrap();
    let mut last = (0.0, -1.0);
    for line in &lines[1..] {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(v.len(), 8);
        assert!(line.split(',').all(|f| f.contains('e')), "{line}");
        let again = modulus_sum(&pair, Complex64::from_polar(v[0], v[1])).unwrap();
        assert!((again - v[4]).abs() < 1e-12, "{} vs {again}", v[4]);
        assert!((v[0], v[1]) > last);
        last = (v[0], v[1]);
    }
}

#[test]
fn emit_on_an_empty_grid_writes_the_header() {
    let dir = TempDir::new().unwrap();
    let s = state(&dir);
    let o = run(&["emit", "--state", p(&s), "--t-points", "0", "--angles", "4"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "t,theta,log_g1_abs,log_g2_abs,log_sum,log_omega,lower_margin,upper_margin\n"
    );
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let s = state(&dir);
    let first = run(&["emit", "--state", p(&s), "--t-points", "20", "--angles", "8"]);
    let threaded = Command::new(env!("CARGO_BIN_EXE_logweight"))
        .args(["emit", "--state", p(&s), "--t-points", "20", "--angles", "8"])
        .env("LOGWEIGHT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(first.stdout, threaded.stdout);
    let a = run(&[
        "verify",
        "ball",
        "--state",
        p(&s),
        "--t-points",
        "20",
        "--sphere-samples",
        "64",
        "--seed",
        "3",
    ]);
    let b = run(&[
        "verify",
        "ball",
        "--state",
        p(&s),
        "--t-points",
        "20",
        "--sphere-samples",
        "64",
        "--seed",
        "3",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn missing_state_is_an_input_error() {
    let o = run(&[
        "verify",
        "sandwich",
        "--state",
        "/nonexistent/state.json",
        "--family",
        "ramey_ullrich",
    ]);
    assert_eq!(code(&o), 2);
    assert!(json(&o)["error"].as_str().unwrap().contains("nonexistent"));
}
