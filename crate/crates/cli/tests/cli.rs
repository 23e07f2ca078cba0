use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn roadsignal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadsignal")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn conf() -> String {
    fixtures().join("pipeline.conf").display().to_string()
}

#[test]
fn pipeline_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = roadsignal(&["--config", &conf(), "--out", &out, "--workers", "2", "pipeline"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["command"], "pipeline");
    assert!(v["result"]["tier1_accuracy"].as_f64().unwrap() > 50.0);

    let run = dir.path().join("fixture").display().to_string();
    let o = roadsignal(&["audit", &run]);
    assert_eq!(code(&o), 0);
    std::fs::write(dir.path().join("fixture/reports/split.json"), "{}").unwrap();
    let o = roadsignal(&["audit", &run]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("reports/split.json"));
}

#[test]
fn synth_writes_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let p = path.display().to_string();
    let o = roadsignal(&["--seed", "3", "synth", "--output", &p, "--per-class", "4", "--non-transportation", "5"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 25);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&roadsignal(&[])), 1);
    assert_eq!(code(&roadsignal(&["bogus"])), 1);
    assert_eq!(code(&roadsignal(&["--help"])), 0);
    assert_eq!(code(&roadsignal(&["--config", &conf(), "--set", "no_such_key=1", "ingest"])), 1);
    assert_eq!(code(&roadsignal(&["--config", &conf(), "--set", "alpha=250", "ingest"])), 1);
    assert_eq!(code(&roadsignal(&["--config", "/does/not/exist.conf", "ingest"])), 1);
}

#[test]
fn unreadable_corpus_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "not json\n{also not\n").unwrap();
    let out = dir.path().display().to_string();
    let corpus = format!("corpus={}", bad.display());
    let o = roadsignal(&["--config", &conf(), "--out", &out, "--set", &corpus, "ingest"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failing_stage_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = roadsignal(&["--config", &conf(), "--out", &out, "rank-sweep", "--ranks", "5,999999"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("fixture/manifest.json").is_file());
}
