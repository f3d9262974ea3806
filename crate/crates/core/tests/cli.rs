//! End-to-end runs of the `kepler-unfold` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kepler-unfold"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("KEPLER_UNFOLD_OUT")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("error JSON on stderr")
}

#[test]
fn simulate_kepler_reports_small_drift() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &[
            "simulate", "--system", "kepler", "--x", "1,0,0", "--v", "0,1,0", "--t-end", "62.83",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(dir.path(), "simulate-kepler.json");
    assert!(s["energy_drift"].as_f64().unwrap() < 1e-9);
    assert!(s["wall_time_s"].as_f64().is_some());
    assert_eq!(s["config"]["system"], "kepler");
    let csv = fs::read_to_string(dir.path().join("simulate-kepler.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,x3,v1,v2,v3,kepler.energy"));
}

#[test]
fn simulate_oscillator_nearly_closes() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &[
            "simulate",
            "--system",
            "oscillator",
            "--energy",
            "-0.5",
            "--Y",
            "1,0,0,0",
            "--U",
            "0,0,0,0",
            "--t-end",
            "6.2832",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "simulate-oscillator.json");
    assert!(s["closure"].as_f64().unwrap() < 1e-4);
}

#[test]
fn missing_flag_is_a_config_error_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("out");
    let out = run(&target, &["simulate", "--system", "kepler", "--x", "1,0,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
    assert!(!target.exists());
}

#[test]
fn system_specific_flags_are_required() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &[
            "simulate",
            "--system",
            "oscillator",
            "--Y",
            "1,0,0,0",
            "--t-end",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn integration_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &[
            "simulate", "--system", "kepler", "--x", "1,0,0", "--v", "-0.5,0,0", "--t-end", "5",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "integration");
}

#[test]
fn identical_runs_give_identical_csv() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = [
        "unfold",
        "--x",
        "1,0.2,0",
        "--v",
        "0.1,0.9,0.2",
        "--lambda",
        "0.3",
    ];
    assert_eq!(run(a.path(), &args).status.code(), Some(0));
    assert_eq!(run(b.path(), &args).status.code(), Some(0));
    let ca = fs::read(a.path().join("unfold.csv")).unwrap();
    let cb = fs::read(b.path().join("unfold.csv")).unwrap();
    assert!(!ca.is_empty());
    assert_eq!(ca, cb);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# circular orbit\nsystem = kepler\nx = 1,0,0\nv = 0,1,0\nt_end = 100  # replaced below\n",
    )
    .unwrap();
    let out = run(
        dir.path(),
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--t-end",
            "3",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(dir.path(), "simulate-kepler.json");
    assert_eq!(s["config"]["t_end"].as_f64(), Some(3.0));
    assert_eq!(s["t_end"].as_f64(), Some(3.0));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kepler-unfold"))
        .args(["verify", "--suite", "commutant-su2xsu2"])
        .env("KEPLER_UNFOLD_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "verify-commutant-su2xsu2.json");
    assert_eq!(s["summary"][0]["max_residual"].as_f64(), Some(0.0));
}

#[test]
fn verify_suites_pass() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &[
            "verify",
            "--suite",
            "kepler-algebra",
            "--samples",
            "100",
            "--seed",
            "7",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "verify-kepler-algebra.json");
    assert!(s["summary"][0]["max_residual"].as_f64().unwrap() < 1e-9);
    let out = run(dir.path(), &["verify", "--suite", "reduction-criterion"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "verify-reduction-criterion.json");
    assert!(s["summary"][0]["max_residual"].as_f64().unwrap() < 1e-10);
    let out = run(dir.path(), &["verify", "--suite", "no-such-suite"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unfold_circular_orbit_matches_kepler() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["unfold", "--x", "1,0,0", "--v", "0,1,0"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "unfold.json");
    assert!(s["max_divergence"].as_f64().unwrap() < 1e-7);
    assert_eq!(s["collision_regularized"], false);
}

#[test]
fn unfold_flags_regularized_collision() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["unfold", "--x", "1,0,0", "--v", "-0.5,0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "unfold.json");
    assert_eq!(s["collision_regularized"], true);
    assert!(s["runs"][0]["kepler"]["error"].is_string());
}

#[test]
fn gauge_sweep_gives_identical_downstairs_orbits() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &[
            "unfold",
            "--x",
            "1,0,0",
            "--v",
            "0,1.2649110640673518,0",
            "--lambda",
            "0..6.28:8",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "unfold.json");
    assert_eq!(s["runs"].as_array().unwrap().len(), 8);
    assert!(s["gauge_spread"].as_f64().unwrap() < 1e-8);
    for i in 0..8 {
        assert!(dir.path().join(format!("unfold-{i:02}.csv")).exists());
    }
}

#[test]
fn failed_tolerance_exits_one() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &[
            "unfold",
            "--x",
            "1,0,0",
            "--v",
            "0,1.1,0",
            "--tolerance",
            "1e-300",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(summary(dir.path(), "unfold.json")["pass"], false);
}

#[test]
fn demos_meet_their_tolerances() {
    let dir = TempDir::new().unwrap();
    for (args, name, tol) in [
        (vec!["demo", "radial"], "demo-radial.json", 1e-8),
        (
            vec!["demo", "calogero", "--l", "0"],
            "demo-calogero.json",
            1e-10,
        ),
        (vec!["demo", "calogero"], "demo-calogero.json", 1e-6),
    ] {
        let out = run(dir.path(), &args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        let s = summary(dir.path(), name);
        assert!(s["max_divergence"].as_f64().unwrap() < tol, "{args:?}");
        assert_eq!(s["pass"], true);
    }
}
