//! End-to-end CLI tests over the committed fixture scenarios.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holoq"))
        .args(args)
        .arg("--out")
        .arg(out_dir)
        .output()
        .expect("binary runs")
}

fn read_report(out_dir: &Path, command: &str) -> serde_json::Value {
    let path = out_dir.join(format!("{command}.report.json"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("report {} missing: {e}", path.display()));
    serde_json::from_str(&text).expect("report parses")
}

#[test]
fn plan_blocks_2_emits_seven_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", "--blocks", "2"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(dir.path(), "plan");
    assert_eq!(report["results"]["plans"][0]["steps"], 7);
    assert_eq!(report["results"]["plans"][0]["step_count"]["three_level_reference"], 21);
    let table = report["results"]["plans"][0]["table"].as_array().unwrap();
    assert!(table.len() >= 19);
    assert_eq!(report["pass"], true);
}

#[test]
fn plan_from_scenario_matches_direct_flag() {
    let dir = tempfile::tempdir().unwrap();
    let scn = fixture("plan2.json");
    let out = run(&["--scenario", scn.to_str().unwrap(), "plan"], dir.path());
    assert!(out.status.success());
    let report = read_report(dir.path(), "plan");
    assert_eq!(report["results"]["plans"][0]["steps"], 7);
}

#[test]
fn verify_gate_cz_reaches_target() {
    let dir = tempfile::tempdir().unwrap();
    let scn = fixture("u2_gate.json");
    let out = run(&["--scenario", scn.to_str().unwrap(), "verify-gate"], dir.path());
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_report(dir.path(), "verify-gate");
    assert_eq!(report["pass"], true);
    let checks = report["checks"].as_array().unwrap();
    let fid = checks
        .iter()
        .find(|c| c["name"].as_str().unwrap().contains("cz: fidelity"))
        .unwrap();
    assert!(fid["measured"].as_f64().unwrap() >= 1.0 - 1e-8);
    // Tolerance sits next to the measured value.
    assert!(fid["tolerance"].as_f64().is_some());
}

#[test]
fn holonomy_check_passes_on_closed_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let scn = fixture("holonomy.json");
    let out = run(&["--scenario", scn.to_str().unwrap(), "holonomy-check"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(dir.path(), "holonomy-check");
    assert_eq!(report["pass"], true);
}

#[test]
fn dangling_pulse_name_exits_2_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let scn = fixture("dangling_pulse.json");
    let out = run(&["--scenario", scn.to_str().unwrap(), "holonomy-check"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing_pulse"), "stderr: {stderr}");
}

#[test]
fn leaky_schedule_exits_1_but_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let scn = fixture("leaky.json");
    let out = run(&["--scenario", scn.to_str().unwrap(), "holonomy-check"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = read_report(dir.path(), "holonomy-check");
    assert_eq!(report["pass"], false);
    let leak = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"].as_str().unwrap().contains("leakage"))
        .unwrap();
    assert!(leak["measured"].as_f64().unwrap() > 0.99);
}

#[test]
fn execute_plan_sweeps_all_4096_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let scn = fixture("plan2.json");
    let out = run(&["--scenario", scn.to_str().unwrap(), "execute-plan"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(dir.path(), "execute-plan");
    assert_eq!(report["pass"], true);
    let sweep = &report["results"]["plans"][0]["sweep"];
    assert_eq!(sweep["inputs_checked"], 4096);
    assert_eq!(sweep["intermediate_hits"], 0);
    assert_eq!(sweep["flip_phase"][0], -1.0);
}

#[test]
fn effective_check_fast_point_passes() {
    let dir = tempfile::tempdir().unwrap();
    let scn = fixture("effective_fast.json");
    let out = run(&["--scenario", scn.to_str().unwrap(), "effective-check"], dir.path());
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_report(dir.path(), "effective-check");
    assert_eq!(report["pass"], true);
    // The assumed second-mechanism convention is recorded in the header.
    let assumptions = report["header"]["assumptions"].as_array().unwrap();
    assert!(assumptions.iter().any(|a| a.as_str().unwrap().contains("ion 2")));
}

#[test]
fn text_format_writes_both_renderings() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", "--blocks", "3", "--format", "text"], dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("plan.report.json").exists());
    assert!(dir.path().join("plan.report.txt").exists());
    let text = std::fs::read_to_string(dir.path().join("plan.report.txt")).unwrap();
    assert!(text.contains("step count"));
}

#[test]
fn unknown_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
