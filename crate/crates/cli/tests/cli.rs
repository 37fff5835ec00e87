use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nls-lab")).arg("--out").arg(dir).args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn spectrum_reports_the_unstable_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["spectrum", "--N", "512"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("spectrum.json"));
    let mu = v["summary"]["mu"].as_f64().unwrap();
    assert!((mu - 2.9050884).abs() < 1e-5, "{mu}");
    assert!(v["mu_relative_difference"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["summary"]["p"].as_f64(), Some(7.0));
    // stdout carries the same summary
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, v["summary"]);
    assert!(dir.path().join("config.json").exists());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "p = 6.0\nomega0 = 2.0\nN = 1024\n").unwrap();
    let out = run(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap(), "--omega", "1.0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let used = json(&dir.path().join("config.json"));
    assert_eq!(used["p"].as_f64(), Some(6.0));
    assert_eq!(used["omega0"].as_f64(), Some(1.0));
    assert_eq!(used["N"].as_u64(), Some(1024));
}

#[test]
fn shooting_the_bare_soliton() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["shoot", "--T", "2", "--dt", "1e-3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("shoot.json"));
    assert!(v["shoot"]["a_star"].as_f64().unwrap().abs() < 1e-6);
    assert!(v["shoot"]["sup_omega_deviation"].as_f64().unwrap() < 1e-6);
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("a");
    assert!(run(&run_dir, &["evolve", "--T", "0.5", "--N", "512"]).status.success());
    let out = run(dir.path(), &["report", "--in", run_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(table, String::from_utf8(out.stdout).unwrap());
    assert_eq!(table.lines().count(), 2);
    // summary.csv itself is not a trajectory, so re-aggregating gives the same table
    let again = run(dir.path(), &["report", "--in", run_dir.to_str().unwrap(), dir.path().to_str().unwrap()]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), table);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["transmogrify"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["spectrum", "--N", "many"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn precondition_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.json");
    std::fs::write(&cfg, r#"{"seed": {"shape": "bump", "h1_norm": 0.5}}"#).unwrap();
    let out = run(dir.path(), &["shoot", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = json(&dir.path().join("error.json"));
    assert_eq!(err["kind"], "precondition");
    assert!(!err["message"].as_str().unwrap().is_empty());
}
