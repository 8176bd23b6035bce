//! The `hcub` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hcub::harness::read_trajectory;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn hcub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcub"))
        .args(args)
        .env_remove("HCUB_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// The simulate config cut down to `horizon` rounds over `seeds`.
fn small_config(dir: &Path, horizon: u64, seeds: &str) -> PathBuf {
    let text = std::fs::read_to_string(configs().join("simulate.toml"))
        .unwrap()
        .replace("horizon = 2000", &format!("horizon = {horizon}"))
        .replace("seeds = [1]", &format!("seeds = {seeds}"));
    let path = dir.join("small.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_configs_validate() {
    for name in ["reference_ablation.toml", "single_leaf.toml", "simulate.toml", "replay.toml"] {
        let o = hcub(&["validate-config", "--config", s(&configs().join(name))]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        let out = String::from_utf8(o.stdout).unwrap();
        assert!(out.starts_with("# valid:"), "{out}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(hcub(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(hcub(&["simulate"]).status.code(), Some(2));
    assert_eq!(hcub(&["simulate", "--config", "x", "--bogus"]).status.code(), Some(2));
    assert_eq!(hcub(&["--help"]).status.code(), Some(0));
}

#[test]
fn failures_name_their_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcub(&["simulate", "--config", s(&dir.path().join("missing.toml"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error class=config"), "{}", stderr(&o));

    let text = std::fs::read_to_string(configs().join("simulate.toml"))
        .unwrap()
        .replace("bucket_count = 2", "bucket_count = 2\nreplay_log = \"sample_log.jsonl\"");
    let both = dir.path().join("both.toml");
    std::fs::write(&both, text).unwrap();
    let o = hcub(&["validate-config", "--config", s(&both)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error class=config") && err.contains("environment"), "{err}");

    let bad_log = dir.path().join("bad.jsonl");
    std::fs::write(&bad_log, "{\"round\": 0}\n").unwrap();
    let o = hcub(&[
        "replay",
        "--config",
        s(&configs().join("replay.toml")),
        "--log",
        s(&bad_log),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error class=log"), "{}", stderr(&o));
}

#[test]
fn simulate_is_reproducible_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 300, "[4]");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = hcub(&["simulate", "--config", s(&config), "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["trajectory.csv", "decisions.csv"] {
        let (x, y) = (std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs between identical runs");
    }
    let rows = read_trajectory(a.join("trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 300);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["final_cumulative_regret"].as_f64().unwrap(), rows[299].cumulative_regret);
    assert_eq!(summary["seed"].as_u64(), Some(4));
    assert_eq!(summary["effective_config"]["run"]["horizon"].as_u64(), Some(300));
}

#[test]
fn ablate_writes_report_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 200, "[1, 2, 3]");
    let out = dir.path().join("out");
    let o = hcub(&["ablate", "--config", s(&config), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for seed in 1..=3 {
        for side in ["on", "off"] {
            assert!(out.join(format!("trajectory_seed{seed}_{side}.csv")).is_file());
        }
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ablation_report.json")).unwrap()).unwrap();
    assert_eq!(report["per_seed"].as_array().unwrap().len(), 3);
    let p = report["sign_test_p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert!(report["effective_config"].is_object());
}

#[test]
fn replay_and_inspect_tree() {
    let dir = tempfile::tempdir().unwrap();
    let replay = configs().join("replay.toml");
    let o = hcub(&["replay", "--config", s(&replay), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("replay_estimates.csv").is_file());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("replay_report.json")).unwrap()).unwrap();
    assert_eq!(doc["summary"]["observations"].as_u64(), Some(800));

    let o = hcub(&["inspect-tree", "--config", s(&replay), "--format", "json", "--inheritance", "off"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tree: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(tree["inheritance_enabled"].as_bool(), Some(false));
    assert_eq!(tree["nodes"][0]["node_path"].as_str(), Some("/"));

    let config = small_config(dir.path(), 100, "[1]");
    let o = hcub(&["inspect-tree", "--config", s(&config), "--out", s(&dir.path().join("t"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(dir.path().join("t/tree.txt")).unwrap(), o.stdout);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 50, "[1]");
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_hcub"))
        .args(["simulate", "--config", s(&config)])
        .env("HCUB_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join("summary.json").is_file());
}
