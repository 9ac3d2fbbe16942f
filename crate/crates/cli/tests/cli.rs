mod common;

use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

fn featlab() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_featlab"));
    cmd.env("FEATLAB_LOG", "warn");
    cmd
}

fn history_rows(out: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(out.join("metrics_history.csv")).unwrap();
    r.records().map(Result::unwrap).collect()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn empty_script_gives_baseline_only_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_config(dir.path(), &common::fixture(dir.path(), 150, 2, 3));
    let script = dir.path().join("script.json");
    std::fs::write(&script, "[]").unwrap();
    let out = dir.path().join("out");
    let status = featlab()
        .args(["--config", cfg.to_str().unwrap(), "--script", script.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap()
        .status;
    assert!(status.success());

    let rows = history_rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][1], "baseline");
    for f in ["importance.json", "statistics.json", "best.csv", "best.json", "session.json", "report.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let rep = report(&out);
    assert_eq!(rep["actions_applied"], 0);
    assert_eq!(rep["best_ordinal"], 0);
    assert_eq!(rep["failure"], Value::Null);
}

#[test]
fn failing_action_truncates_report_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_config(dir.path(), &common::fixture(dir.path(), 150, 2, 3));
    let script = dir.path().join("script.json");
    let actions = json!([
        {"kind": "exclude", "feature": "noise1"},
        {"kind": "transform", "feature": "x1", "transform": "r2"},
        {"kind": "exclude", "feature": "missing_feature"},
        {"kind": "exclude", "feature": "noise2"}
    ]);
    std::fs::write(&script, actions.to_string()).unwrap();
    let out = dir.path().join("out");
    let output = featlab()
        .args(["--config", cfg.to_str().unwrap(), "--script", script.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("action 3 failed"), "{stderr}");

    let rows = history_rows(&out);
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[2][1], "transform");
    let rep = report(&out);
    assert_eq!(rep["actions_applied"], 2);
    assert_eq!(rep["failure"]["index"], 3);
}

#[test]
fn seeded_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_config(dir.path(), &common::fixture(dir.path(), 150, 3, 3));
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let status = featlab()
            .args(["--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()])
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        std::fs::read_to_string(out.join("metrics_history.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("1", "b"));
}

#[test]
fn missing_config_is_an_error() {
    let output = featlab().output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("--config"));
}
