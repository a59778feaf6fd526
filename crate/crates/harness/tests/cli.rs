use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emphatic_harness::ExperimentConfig;

fn etd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etd")).args(args).output().expect("etd runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const RANDOM: &str = r#"{
  "id": "small",
  "environment": {"kind": "random", "seed": 3, "limits": {"states": [4, 4], "actions": [2, 2], "features": [2, 2]}},
  "algorithm": "etd-lambda",
  "schedule": {"kind": "hyperbolic", "c1": 1.0, "c2": 50.0},
  "num_runs": 4,
  "seed": 11,
  "stop": {"kind": "steps", "count": 2000},
  "record": {"every": 100, "full_theta": true}
}"#;

const MINER: &str = r#"{
  "id": "mini-miner",
  "environment": {"kind": "miner"},
  "algorithm": "etd-lambda",
  "schedule": {"kind": "constant", "alpha": 0.001},
  "clip": 0.5,
  "num_runs": 3,
  "seed": 1,
  "stop": {"kind": "events", "event": "entrapment", "count": 20},
  "record": {"on": "entrapment"},
  "monte_carlo": {"episodes": 2000, "seed": 3}
}"#;

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", RANDOM);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = etd(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(res.status.success(), "{}", stderr(&res));
    }
    for name in ["small_runs.csv", "small_target_aggregate.csv"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between runs");
    }
    let runs = std::fs::read_to_string(a.join("small_runs.csv")).unwrap();
    let mut lines = runs.lines();
    assert_eq!(lines.next().unwrap(), "config_id,run,event_index,value,theta_0,theta_1");
    assert_eq!(lines.count(), 4 * 20);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", RANDOM);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    etd(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    let res = etd(&["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "12", "--runs", "2"]);
    assert!(res.status.success());
    let x = std::fs::read_to_string(a.join("small_runs.csv")).unwrap();
    let y = std::fs::read_to_string(b.join("small_runs.csv")).unwrap();
    assert_ne!(x, y);
    assert_eq!(y.lines().count(), 1 + 2 * 20);
}

#[test]
fn invalid_config_exits_with_one_and_names_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{
          "environment": {"kind": "two-state"},
          "algorithm": "gtd2",
          "schedule": {"kind": "constant", "alpha": -1.0},
          "stop": {"kind": "steps", "count": 10},
          "record": {"on": "entrapment"}
        }"#,
    );
    let res = etd(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let err = stderr(&res);
    for field in ["algorithm", "schedule.alpha", "record.on"] {
        assert!(err.contains(field), "missing {field} in {err}");
    }
    assert!(!dir.path().join("experiment_runs.csv").exists());
}

#[test]
fn malformed_json_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"environment": {"kind": "two-state"}, "surprise": 1}"#);
    assert_eq!(etd(&["analyze", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn exhausted_step_budget_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cap.json",
        r#"{
          "environment": {"kind": "two-state"},
          "algorithm": "td0",
          "schedule": {"kind": "constant", "alpha": 0.1},
          "stop": {"kind": "events", "event": "termination", "count": 100, "max_steps": 30}
        }"#,
    );
    let res = etd(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2), "{}", stderr(&res));
}

#[test]
fn missing_config_file_exits_with_two() {
    assert_eq!(etd(&["analyze", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn analyze_prints_checks_and_key_system() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", RANDOM);
    let res = etd(&["analyze", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = stdout(&res);
    for needle in ["[PASS] target termination", "[PASS] coverage", "A =", "b = ", "theta* = ", "positive definite"] {
        assert!(text.contains(needle), "missing {needle:?} in\n{text}");
    }
}

#[test]
fn analyze_reports_singular_miner_system() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "miner.json", MINER);
    let res = etd(&["analyze", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = stdout(&res);
    assert_eq!(text.matches("== ").count(), 3);
    assert!(text.contains("theta* = none"));
}

#[test]
fn mc_prints_estimate_and_rejects_unknown_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "miner.json", MINER);
    let res = etd(&["mc", cfg.to_str().unwrap(), "--policy", "cautious", "--episodes", "3000", "--seed", "4"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = stdout(&res);
    let value: f64 = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((1.8..2.3).contains(&value), "{text}");
    assert!(text.contains("3000 episodes"));

    let res = etd(&["mc", cfg.to_str().unwrap(), "--policy", "greedy", "--episodes", "10"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("uniform"));
}

#[test]
fn svg_has_curve_band_and_reference_per_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "miner.json", MINER);
    let res = etd(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--svg"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let svg = std::fs::read_to_string(dir.path().join("mini-miner.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert_eq!(svg.matches("<polygon").count(), 3);
    assert_eq!(svg.matches("stroke-dasharray=\"2,4\"").count(), 3);
    for target in ["uniform", "headfirst", "cautious"] {
        assert!(svg.contains(target));
        let agg = std::fs::read_to_string(dir.path().join(format!("mini-miner_{target}_aggregate.csv"))).unwrap();
        assert_eq!(agg.lines().next().unwrap(), "event_index,mean,stderr,lo_band,hi_band");
        assert_eq!(agg.lines().count(), 1 + 20);
    }
    let runs = std::fs::read_to_string(dir.path().join("mini-miner_runs.csv")).unwrap();
    assert!(runs.lines().nth(1).unwrap().starts_with("mini-miner/uniform,0,1,"));
    assert_eq!(runs.lines().count(), 1 + 3 * 3 * 20);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.prepare().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
