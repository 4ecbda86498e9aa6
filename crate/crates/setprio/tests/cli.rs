use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn setprio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_setprio")).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = setprio(&["run", "--scenario", fixture("reach.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], ["t", "q_1", "q_2", "q_3"]);
    assert!(header.contains(&"elbow_limit_mode"));
    // 3 s at 10 ms, both ends included
    assert_eq!(lines.count(), 301);

    let metrics = read_json(dir.path().join("metrics.json"));
    assert_eq!(metrics["scenario"], "reach");
    assert_eq!(metrics["cycles"], 301);
    assert!(metrics["activation_count"]["elbow_limit"].is_u64());
    assert!(metrics["tracking_rmse"].as_f64().unwrap() < 0.01);
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = setprio(&[
        "run",
        "--scenario",
        fixture("reach.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--dt",
        "0.02",
        "--duration",
        "1",
        "--with-optimization",
        "true",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let metrics = read_json(dir.path().join("metrics.json"));
    assert_eq!(metrics["cycles"], 51);
    assert_eq!(metrics["with_optimization"], true);
}

#[test]
fn inverted_thresholds_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = setprio(&["run", "--scenario", fixture("inverted_thresholds.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("elbow_limit"), "{err}");
    assert!(!dir.path().join("trace.csv").exists());

    let validate = setprio(&["validate", "--scenario", fixture("inverted_thresholds.json").to_str().unwrap()]);
    assert_eq!(validate.status.code(), Some(2));
}

#[test]
fn divergence_aborts_with_the_cycle_index() {
    let dir = tempfile::tempdir().unwrap();
    let out = setprio(&["run", "--scenario", fixture("diverging.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("numerical abort at cycle "), "{err}");
    let cycle: usize = err
        .split("cycle ")
        .nth(1)
        .and_then(|s| s.split(':').next())
        .and_then(|s| s.parse().ok())
        .expect("cycle index in message");
    assert!(cycle > 0);
}

#[test]
fn malformed_json_reports_line_and_column() {
    let out = setprio(&["validate", "--scenario", fixture("malformed.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line ") && err.contains("column "), "{err}");
    assert!(err.contains("malformed.json"), "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let out = setprio(&["validate", "--scenario", fixture("nope.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_arguments_exit_with_validation_code() {
    assert_eq!(setprio(&["run"]).status.code(), Some(2));
    assert_eq!(setprio(&["launch"]).status.code(), Some(2));
    assert_eq!(setprio(&["--help"]).status.code(), Some(0));
}

#[test]
fn compare_without_set_based_tasks_has_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let out = setprio(&["compare", "--scenario", fixture("no_set_based.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cmp = read_json(dir.path().join("comparison.json"));
    assert_eq!(cmp["rmse"]["delta"], 0.0);
    assert_eq!(cmp["joints_reaching_limits"]["delta"], 0);
    assert!(cmp["activations"].as_object().unwrap().is_empty());
    for leg in ["without", "with"] {
        assert!(dir.path().join(leg).join("trace.csv").exists());
        assert!(dir.path().join(leg).join("metrics.json").exists());
    }
    let a = std::fs::read(dir.path().join("without/trace.csv")).unwrap();
    let b = std::fs::read(dir.path().join("with/trace.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fd_check_passes_on_shipped_chains_and_flags_a_coarse_step() {
    let arm = shipped("arm7.json");
    let ok = setprio(&["fd-check", "--chain", arm.to_str().unwrap(), "--fd-samples", "100"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let planar = setprio(&["fd-check", "--chain", shipped("planar2r.json").to_str().unwrap()]);
    assert_eq!(planar.status.code(), Some(0));
    let via_scenario = setprio(&["fd-check", "--scenario", shipped("line_manipulability.json").to_str().unwrap(), "--fd-samples", "20"]);
    assert_eq!(via_scenario.status.code(), Some(0));

    let coarse = setprio(&["fd-check", "--chain", arm.to_str().unwrap(), "--delta-q", "1e-2"]);
    assert_eq!(coarse.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&coarse.stdout).contains("worst configuration"));
}

#[test]
fn fd_check_needs_exactly_one_source() {
    assert_eq!(setprio(&["fd-check"]).status.code(), Some(2));
    let both = setprio(&[
        "fd-check",
        "--chain",
        shipped("arm7.json").to_str().unwrap(),
        "--scenario",
        shipped("line_manipulability.json").to_str().unwrap(),
    ]);
    assert_eq!(both.status.code(), Some(2));
    let bad_rows = setprio(&["fd-check", "--chain", shipped("planar2r.json").to_str().unwrap(), "--rows", "sideways"]);
    assert_eq!(bad_rows.status.code(), Some(2));
}
