use std::path::Path;
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_fracsemi");

fn run(dir: &Path, command: &str, config: &str, out: &str, extra: &[&str]) -> i32 {
    let cfg = dir.join(format!("{out}.json"));
    std::fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join(out))
        .args(extra)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn report(dir: &Path, out: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(out).join("report.json")).unwrap()).unwrap()
}

fn read(dir: &Path, out: &str, file: &str) -> String {
    std::fs::read_to_string(dir.join(out).join(file)).unwrap()
}

#[test]
fn solve_reports_two_ordered_solutions() {
    let tmp = TempDir::new().unwrap();
    let code = run(tmp.path(), "solve", r#"{"s": 0.25, "n": 128}"#, "two", &[]);
    assert_eq!(code, 0);
    let rep = report(tmp.path(), "two");
    assert_eq!(rep["passed"], true);
    let sols = rep["results"]["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 2);
    assert_eq!(sols[0]["classification"], "minimizer");
    assert_eq!(sols[1]["classification"], "mountain-pass");
    assert!(sols[0]["energy"].as_f64().unwrap() <= 0.0);
    assert!(sols[1]["energy"].as_f64().unwrap() > 0.0);
    let csv = read(tmp.path(), "two", "solution_2.csv");
    assert!(csv.starts_with("x,u,u_under,residual\n"));
    assert_eq!(csv.lines().count(), 129);
    assert!(!csv.contains('\r'));
}

#[test]
fn critical_solve_has_one_solution_and_a_marker() {
    let tmp = TempDir::new().unwrap();
    let code = run(tmp.path(), "solve", r#"{"s": 0.25, "n": 128, "r": 3.0}"#, "crit", &[]);
    assert_eq!(code, 0);
    let rep = report(tmp.path(), "crit");
    assert_eq!(rep["results"]["critical_case"], true);
    assert_eq!(rep["results"]["solutions"].as_array().unwrap().len(), 1);
}

#[test]
fn invalid_configs_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(run(d, "solve", r#"{"s": 0.25, "n": 64, "r": 5.0}"#, "super", &[]), 2);
    assert_eq!(run(d, "barriers", r#"{"s": 0.6, "n": 64}"#, "s", &[]), 2);
    assert_eq!(run(d, "eigen", r#"{"s": 0.6, "n": 64, "bogus": 1}"#, "unknown", &[]), 2);
    assert_eq!(run(d, "solve", r#"{"s": 0.25, "n": 64, "q": 1.5}"#, "q", &[]), 2);
    assert_eq!(run(d, "solve", r#"{"s": 0.25, "n": 64, "mu": 0.0}"#, "mu", &[]), 2);
    assert!(!d.join("super").exists());
}

#[test]
fn operator_commands_accept_s_above_one_half() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(tmp.path(), "eigen", r#"{"s": 0.75, "n": 128}"#, "eig", &[]), 0);
    assert!(read(tmp.path(), "eig", "eigen.csv").starts_with("x,phi1\n"));
}

#[test]
fn output_directory_needs_force() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"s": 0.25, "n": 64}"#;
    assert_eq!(run(tmp.path(), "barriers", cfg, "b", &[]), 0);
    assert_eq!(run(tmp.path(), "barriers", cfg, "b", &[]), 2);
    assert_eq!(run(tmp.path(), "barriers", cfg, "b", &["--force"]), 0);
    let csv = read(tmp.path(), "b", "barriers.csv");
    assert!(csv.starts_with("x,phi1,h,u_under,z_super,psi\n"));
}

#[test]
fn failed_certification_exits_with_one() {
    let tmp = TempDir::new().unwrap();
    // below the threshold the subsolution certificate fails
    let code = run(tmp.path(), "barriers", r#"{"s": 0.25, "n": 64, "lambda": 1.0}"#, "low", &[]);
    assert_eq!(code, 1);
    let rep = report(tmp.path(), "low");
    assert_eq!(rep["passed"], false);
    assert_eq!(rep["certifications"]["subsolution"], false);
}

const SWEEP: &str = r#"{
    "s": 0.25, "n": 64, "seed": 3,
    "lambda": {"from": 1.0, "to": 30.0, "points": 5, "scale": "geometric"},
    "mu": {"from": 0.0, "to": 0.75, "points": 4, "scale": "linear", "relative": true}
}"#;

#[test]
fn sweep_is_complete_sorted_and_deterministic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert_eq!(run(d, "sweep", SWEEP, "a", &["--workers", "3"]), 0);
    assert_eq!(run(d, "sweep", SWEEP, "b", &["--workers", "1"]), 0);
    let a = read(d, "a", "sweep.csv");
    assert_eq!(a, read(d, "b", "sweep.csv"));
    assert_eq!(read(d, "a", "report.json"), read(d, "b", "report.json"));
    let rows: Vec<Vec<&str>> = a.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 20);
    let lambdas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[0] <= w[1]));

    // rows below the lambda0 bracket find nothing
    assert_eq!(run(d, "lambda0", r#"{"s": 0.25, "n": 64}"#, "l0", &[]), 0);
    let lo = report(d, "l0")["results"]["lambda_lo"].as_f64().unwrap();
    for r in &rows {
        if r[0].parse::<f64>().unwrap() < lo {
            assert_eq!(r[2], "false");
            assert_eq!(r[3], "0");
        }
    }
    assert!(rows.iter().any(|r| r[3] == "2"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"s": 0.3, "n": 96, "seed": 11}"#;
    assert_eq!(run(tmp.path(), "solve", cfg, "x", &[]), 0);
    assert_eq!(run(tmp.path(), "solve", cfg, "y", &[]), 0);
    for f in ["report.json", "solution_1.csv", "solution_2.csv"] {
        assert_eq!(read(tmp.path(), "x", f), read(tmp.path(), "y", f), "{f}");
    }
}
