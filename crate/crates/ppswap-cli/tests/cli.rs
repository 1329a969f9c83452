//! End-to-end checks of the ppswap binary: exit codes, output files and
//! run-to-run determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn ppswap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppswap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("report.json")).expect("report written");
    serde_json::from_str(&text).expect("report parses")
}

#[test]
fn preset_run_completes_with_exit_0() {
    let dir = tempdir().unwrap();
    let out = ppswap(&[
        "--preset",
        "btc_ltc_paper",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let r = report(dir.path());
    assert_eq!(r["phase"], "completed");
    assert_eq!(r["accepted_updates_total"], 1001);
    assert!(dir.path().join("events.jsonl").exists());
}

#[test]
fn aborted_scenario_exits_2() {
    let dir = tempdir().unwrap();
    let mut cfg = ppswap_core::scenario::preset("btc_ltc_paper").unwrap();
    cfg.strategies.insert(
        "bob".into(),
        ppswap_core::strategy::Strategy::AbortAt { step: 2 },
    );
    let scenario_path = dir.path().join("abort.json");
    fs::write(&scenario_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = ppswap(&[
        "--scenario",
        scenario_path.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let r = report(&dir.path().join("out"));
    assert_eq!(r["phase"], "aborted");
    assert_eq!(r["abort_step"], 2);
}

#[test]
fn config_error_exits_1_and_names_field() {
    let dir = tempdir().unwrap();
    let mut cfg = ppswap_core::scenario::preset("btc_ltc_paper").unwrap();
    cfg.terms.price = None;
    let scenario_path = dir.path().join("bad.json");
    fs::write(&scenario_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = ppswap(&["--scenario", scenario_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("terms.price"), "stderr: {stderr}");
}

#[test]
fn missing_input_exits_1() {
    let out = ppswap(&[]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = ppswap(&[
            "--preset",
            "hub_composed",
            "--seed",
            "42",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
    }
    assert_eq!(
        fs::read(a.join("events.jsonl")).unwrap(),
        fs::read(b.join("events.jsonl")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("report.json")).unwrap(),
        fs::read(b.join("report.json")).unwrap()
    );
}

#[test]
fn sweep_writes_csv_and_json() {
    let dir = tempdir().unwrap();
    let out = ppswap(&[
        "--preset",
        "wrap_rsk",
        "--sweep-aborts",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    // Two parties, N+1 abort points each, plus the header.
    assert_eq!(csv.lines().count(), 1 + 2 * 11);
    let sweep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["max_gain_units"], 1);
}

#[test]
fn batch_runs_write_numbered_dirs() {
    let dir = tempdir().unwrap();
    let out = ppswap(&[
        "--preset",
        "wrap_rsk",
        "--batch",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    for i in 0..3 {
        let r = report(&dir.path().join(format!("run_{i}")));
        assert_eq!(r["phase"], "completed");
        assert_eq!(r["seed"], i);
    }
}

#[test]
fn list_presets_names_all() {
    let out = ppswap(&["--list-presets"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ppswap_core::scenario::PRESET_NAMES {
        assert!(stdout.contains(name), "missing {name}");
    }
}
