use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tilted(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tilted"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn tilted")
}

fn sidecar(run: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap()
}

#[test]
fn phase_diagram_writes_table_and_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tilted(tmp.path(), &["phase-diagram", "--out", "ph", "--set", "checks.u_shaped=true"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS u_shaped"));

    let mut rdr = csv::Reader::from_path(tmp.path().join("ph/phase.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["r", "delta", "snr", "snr_q", "kappa", "margin"]);
    assert_eq!(rdr.records().count(), 3 * 121 * 100);

    let meta = sidecar(&tmp.path().join("ph"));
    assert_eq!(meta["command"], "phase-diagram");
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(meta["outputs"][0], "phase.csv");
    assert_eq!(meta["criteria"][0]["passed"], true);
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tilted(tmp.path(), &["ising", "--set", "run.no_such_key=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn invalid_parameter_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tilted(tmp.path(), &["iterated", "--out", "it", "--set", "instance.sigma=-1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn dry_run_prints_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"run": {"n_samples": 123}}"#).unwrap();
    let out = tilted(tmp.path(), &["iterated", "--dry-run", "--config", "c.json", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["run"]["n_samples"], 123);
    assert_eq!(v["run"]["seed"], 9);
    assert!(fs::read_dir(tmp.path()).unwrap().count() == 1);
}

#[test]
fn small_ising_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tilted(
        tmp.path(),
        &[
            "ising",
            "--set",
            "run.d=4",
            "--set",
            "run.n_samples=4000",
            "--set",
            "run.mala_steps=200",
            "--set",
            "checks.max_tv=0.2",
            "--seed",
            "3",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let runs: Vec<_> = fs::read_dir(tmp.path().join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 1);
    let dir = runs[0].as_ref().unwrap().path();
    assert!(dir.file_name().unwrap().to_str().unwrap().starts_with("ising-"));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["d"], 4);
    assert!(report["tv"].as_f64().unwrap() < 0.2);
}

#[test]
fn iterated_reports_legs_per_arm() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tilted(
        tmp.path(),
        &[
            "iterated",
            "--out",
            "it",
            "--set",
            "run.n_samples=2000",
            "--set",
            "run.k_star=3",
            "--set",
            "run.thermalize_duration=0.2",
            "--set",
            "checks.thermalization_helps=true",
            "--set",
            "checks.max_cov_err=0.15",
        ],
    );
    let code = out.status.code();
    assert!(code == Some(0) || code == Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(tmp.path().join("it/legs.csv")).unwrap();
    let arms: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(arms.iter().filter(|a| *a == "thermalized").count(), 3);
    assert_eq!(arms.iter().filter(|a| *a == "marginalized").count(), 3);
    let meta = sidecar(&tmp.path().join("it"));
    assert_eq!(meta["criteria"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_changes_the_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    for seed in ["1", "2"] {
        let out = tilted(tmp.path(), &["iterated", "--set", "run.n_samples=200", "--seed", seed]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read_dir(tmp.path().join("runs")).unwrap().count(), 2);
}
