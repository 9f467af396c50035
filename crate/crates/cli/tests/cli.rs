//! Exit codes and outputs of the `dcm-sim` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn dcm_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcm-sim")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn completed_run_writes_log_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("scenario1_lipm.toml");
    let out = dcm_sim(&["run", "--config", path_str(&config), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("scenario1_lipm.csv")).unwrap();
    assert!(csv.starts_with("t_s,step,"));
    // header, 10 steps of 500 cycles, one final sample
    assert_eq!(csv.lines().count(), 1 + 10 * 500 + 1);
    let summary = std::fs::read_to_string(dir.path().join("scenario1_lipm_summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"completed\""));
}

#[test]
fn diverged_run_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let tuned = std::fs::read_to_string(configs().join("scenario2_tuned.toml")).unwrap();
    let config = dir.path().join("slow.toml");
    std::fs::write(&config, format!("timing_scale = 1.5\n{tuned}")).unwrap();
    let out = dcm_sim(&["run", "--config", path_str(&config), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("diverged"));
    assert!(dir.path().join("slow.csv").exists());
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    let out = dcm_sim(&["run", "--config", path_str(&missing), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "step_period = -0.5\n").unwrap();
    let out = dcm_sim(&["run", "--config", path_str(&bad), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    let config = configs().join("scenario1_lipm.toml");
    let out = dcm_sim(&["sweep", "--config", path_str(&config), "--vary", "no_such_key=0:1:2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_prints_one_row_per_value() {
    let config = configs().join("scenario2_tuned.toml");
    let out = dcm_sim(&["sweep", "--config", path_str(&config), "--vary", "timing_scale=1.0:1.5:3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].contains(",completed,20,"));
    assert!(lines[3].contains(",diverged,"));
}

#[test]
fn tune_timing_reproduces_shipped_period() {
    let config = configs().join("scenario2_tuned.toml");
    let out = dcm_sim(&["tune-timing", "--config", path_str(&config)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let value: f64 = text.lines().next().unwrap().trim_start_matches("step_period = ").parse().unwrap();
    assert!((value - 0.39721046703963675).abs() < 1e-9, "{value}");
}
