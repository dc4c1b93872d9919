use std::path::Path;
use std::process::{Command, Output};

use tbuav::experiment::{RunRecord, CSV_HEADER};

fn tbuav(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tbuav"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn run_writes_one_row_per_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let out = tbuav(dir.path(), &["run", "--seed", "5", "--workers", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3);
    for (row, name) in rows.iter().zip(["proposed", "assoc_uniform_power", "random_assoc_uniform_power"]) {
        assert_eq!(row.split(',').nth(4), Some(name));
    }
    let json = std::fs::read_to_string(dir.path().join("run.json")).unwrap();
    let record: RunRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(record.rows.len(), 3);
    assert_eq!(record.spec.seed, 5);
}

#[test]
fn strategy_flag_selects_one_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let out = tbuav(dir.path(), &["run", "--strategy", "random_assoc_uniform_power"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.contains(",random_assoc_uniform_power,"));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let zero = tbuav(dir.path(), &["run", "--workers", "0"]);
    assert!(!zero.status.success());
    assert!(String::from_utf8_lossy(&zero.stderr).contains("workers"));

    let unknown = tbuav(dir.path(), &["run", "--strategy", "greedy"]);
    assert!(!unknown.status.success());

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "trials = 2\nno_such_key = 1\n").unwrap();
    let bad = tbuav(dir.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert!(!bad.status.success());

    let missing = tbuav(dir.path(), &["run", "--config", "/nonexistent/cfg.toml"]);
    assert!(!missing.status.success());
}

#[test]
fn snapshot_lists_served_links() {
    let dir = tempfile::tempdir().unwrap();
    let out = tbuav(dir.path(), &["snapshot", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("snapshot.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(dir.path().join("snapshot.json").exists());
}
