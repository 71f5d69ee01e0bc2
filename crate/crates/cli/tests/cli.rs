use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn comirror(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_comirror"))
        .args(args)
        .env("COMIRROR_OUT", out)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn summary(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn run_tp1_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = comirror(dir.path(), &["run", "--problem", "tp1", "--geometry", "euclidean", "--eps", "1e-3", "--budget-f", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir.path().join("tp1.summary.json"));
    let f = s["best"]["f"].as_f64().unwrap();
    assert!((-1.0..=-0.90).contains(&f), "best f {f}");
    assert!(s["counters"]["f_evals"].as_u64().unwrap() <= 200);
    let csv = std::fs::read_to_string(dir.path().join("tp1.history.csv")).unwrap();
    assert!(csv.starts_with("k,x1,x2,f,g,eps_feasible,E1,E2,E_norm,t,delta,inv_norm,boundary_truncated\n"));
}

#[test]
fn zero_budget_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = comirror(dir.path(), &["run", "--problem", "tp1", "--budget-f", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&dir.path().join("tp1.summary.json"));
    assert_eq!(s["termination"], "budget_exhausted");
    assert!(s["best"].is_null());
}

#[test]
fn tp3_entropy_reaches_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = comirror(dir.path(), &["run", "--problem", "tp3", "--geometry", "entropy"]);
    assert_eq!(o.status.code(), Some(0));
    let f = summary(&dir.path().join("tp3.summary.json"))["best"]["f"].as_f64().unwrap();
    assert!((f - 84.6710).abs() <= 0.1, "best f {f}");
}

#[test]
fn out_flag_beats_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let o = comirror(env_dir.path(), &["run", "--problem", "tp2", "--out", flag_dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.path().join("tp2.summary.json").exists());
    assert!(!env_dir.path().join("tp2.summary.json").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--problem", "tp1", "--bogus"][..],
        &["run", "--problem", "nope"],
        &["run"],
        &["run", "--problem", "tp1", "--eps", "-1"],
        &["run", "--problem", "tp1", "--geometry", "hyperbolic"],
        &["frobnicate"],
    ] {
        let o = comirror(dir.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(comirror(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn poisedness_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = comirror(dir.path(), &["run", "--problem", "tp2", "--M", "1", "--strategy", "random-ball", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let s = summary(&dir.path().join("tp2.summary.json"));
    assert_eq!(s["termination"], "poisedness_failure");
}

#[test]
fn summary_config_round_trips() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let o = comirror(
        first.path(),
        &["run", "--problem", "tp2", "--strategy", "random-ball", "--seed", "41", "--delta-scale", "0.3", "--weight-rule", "uniform-active", "--geometry", "entropy"],
    );
    assert_eq!(o.status.code(), Some(0));
    let cfg = first.path().join("tp2.summary.json");
    let o = comirror(second.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let a = std::fs::read(first.path().join("tp2.history.csv")).unwrap();
    let b = std::fs::read(second.path().join("tp2.history.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(summary(&cfg)["config"], summary(&second.path().join("tp2.summary.json"))["config"]);
}

#[test]
fn problem_files_run_like_built_ins() {
    let dir = tempfile::tempdir().unwrap();
    let file = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/problems/tp2.json");
    assert_eq!(comirror(dir.path(), &["run", "--problem", file]).status.code(), Some(0));
    let from_file = std::fs::read(dir.path().join("tp2.history.csv")).unwrap();
    assert_eq!(comirror(dir.path(), &["run", "--problem", "tp2"]).status.code(), Some(0));
    let built_in = std::fs::read(dir.path().join("tp2.history.csv")).unwrap();
    assert_eq!(from_file, built_in);
}

fn suite_rows(dir: &Path) -> Vec<csv::StringRecord> {
    let o = comirror(dir, &["suite"]);
    assert_eq!(o.status.code(), Some(0));
    let mut rd = csv::Reader::from_path(dir.join("suite.csv")).unwrap();
    assert_eq!(
        rd.headers().unwrap().iter().collect::<Vec<_>>(),
        ["problem", "geometry", "final_f", "f_evals", "g_evals", "reference_f", "gap_to_optimum"]
    );
    rd.records().map(Result::unwrap).collect()
}

#[test]
fn suite_schema_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let rows = suite_rows(dir.path());
    let keys: Vec<(String, String)> = rows.iter().map(|r| (r[0].to_string(), r[1].to_string())).collect();
    let expected: Vec<(String, String)> = ["tp1", "tp2", "tp3"]
        .iter()
        .flat_map(|p| ["euclidean", "entropy"].map(|g| (p.to_string(), g.to_string())))
        .collect();
    assert_eq!(keys, expected);
    for r in &rows {
        assert_eq!(r.len(), 7);
        r[3].parse::<u64>().unwrap();
        r[4].parse::<u64>().unwrap();
        r[5].parse::<f64>().unwrap();
        assert!(dir.path().join(format!("{}_{}.history.csv", &r[0], &r[1])).exists());
    }
    let again = tempfile::tempdir().unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("suite.csv")).unwrap(),
        {
            suite_rows(again.path());
            std::fs::read(again.path().join("suite.csv")).unwrap()
        }
    );
}

#[test]
fn suite_matches_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let rows = suite_rows(dir.path());
    let tp2 = rows.iter().find(|r| &r[0] == "tp2" && &r[1] == "euclidean").unwrap();
    assert!((tp2[2].parse::<f64>().unwrap() - 7.5587).abs() <= 0.1);
    let tp3 = rows.iter().find(|r| &r[0] == "tp3" && &r[1] == "euclidean").unwrap();
    let gap: f64 = tp3[6].parse().unwrap_or(f64::INFINITY);
    assert!(gap <= 0.15, "tp3 euclidean gap {:?}", &tp3[6]);
}

#[test]
fn check_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = comirror(dir.path(), &["check"]);
    let doc = summary(&dir.path().join("check.json"));
    let all = doc["passed"].as_bool().unwrap();
    assert_eq!(o.status.code() == Some(0), all);
    let checks = doc["checks"].as_array().unwrap();
    let passed = |name: &str| checks.iter().find(|c| c["name"] == name).unwrap()["passed"].as_bool().unwrap();
    for name in ["harmonic_sum", "strong_convexity", "mirror_grid", "interpolation_bound", "efficiency_estimate/tp1_euclidean", "tp3_optimum"] {
        assert!(passed(name), "{name}");
    }
}
