use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn lmtp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmtp")).args(args).env("RUST_LOG", "info").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(spec: &str, n: usize, seed: u64, out: &Path) {
    let r = lmtp(&["simulate", "--spec", s(&fixture(spec)), "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", s(out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
}

/// Small, fast configuration: GLM learners, three folds, few multipliers.
fn quick_config(dir: &Path, input: &Path, extra: Value) -> PathBuf {
    let mut c = json!({
        "input": input,
        "out": dir.join("out"),
        "seed": 3,
        "policy": {"kind": "static", "value": 1.0},
        "learners": {"outcome": [{"name": "glm"}], "censoring": [{"name": "glm"}], "ratio": [{"name": "glm"}]},
        "folds": {"J": 3},
        "band": {"B": 500, "level": 0.95}
    });
    for (k, v) in extra.as_object().unwrap() {
        c[k] = v.clone();
    }
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&c).unwrap()).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn estimate_writes_report_curve_and_influence_files() {
    let dir = tempfile::tempdir().unwrap();
    simulate("d1.json", 800, 7, dir.path());
    let config = quick_config(dir.path(), &dir.path().join("data.csv"), json!({"estimator": "tmle"}));
    let r = lmtp(&["estimate", "--config", s(&config)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let out = dir.path().join("out");
    for f in ["report.json", "curve.csv", "eif.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config_digest"].as_str().unwrap().len(), 64);
    let estimates = report["estimates"].as_array().unwrap();
    assert_eq!(estimates.len(), 2);
    for e in estimates {
        let theta = e["theta"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&theta));
        assert!(e["score_residual"].as_f64().unwrap().abs() < 1e-8);
    }
    assert_eq!(csv_rows(&out.join("eif.csv")).len(), 800);
    assert!(stderr(&r).contains("weights t=1"), "weight diagnostics are logged");
}

#[test]
fn flags_override_the_config_and_add_a_contrast() {
    let dir = tempfile::tempdir().unwrap();
    simulate("d1.json", 600, 8, dir.path());
    let config = quick_config(dir.path(), &dir.path().join("data.csv"), json!({}));
    let out = dir.path().join("flags");
    let r = lmtp(&["estimate", "--config", s(&config), "--out", s(&out), "--horizons", "2", "--seed", "11", "--reference", "identity", "--threads", "2"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 11);
    assert_eq!(report["estimates"].as_array().unwrap().len(), 1);
    assert_eq!(csv_rows(&out.join("contrast.csv")).len(), 1);
}

#[test]
fn monotone_censoring_violation_exits_2_and_lists_it() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "A1,C1,D1,Y1,L1_0,A2,C2,D2,Y2,L2_0,Y3\n1,1,0,0,0,1,1,0,0,1,0\n0,0,0,0,0,0,1,0,0,0,0\n").unwrap();
    let r = lmtp(&["validate", "--input", s(&data)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("unit 1: censoring not monotone at t=2"), "{}", stderr(&r));
    let config = quick_config(dir.path(), &data, json!({}));
    let r = lmtp(&["estimate", "--config", s(&config)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("censoring not monotone"));
    assert!(!dir.path().join("out/report.json").exists());
}

#[test]
fn all_horizons_on_three_periods_give_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    simulate("three_period.json", 600, 5, dir.path());
    let config = quick_config(dir.path(), &dir.path().join("data.csv"), json!({"horizons": "all"}));
    let r = lmtp(&["estimate", "--config", s(&config)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let rows = csv_rows(&dir.path().join("out/curve.csv"));
    assert_eq!(rows.len(), 3);
    let projected: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(projected.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn failing_horizon_exits_3_after_writing_the_rest() {
    // Everyone still at risk has the event at time 2: no risk set there.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("early.csv");
    let mut text = String::from("L0_0,A1,C1,D1,Y1,L1_0,A2,C2,D2,Y2,L2_0,Y3\n");
    for i in 0..60 {
        let (w, a, l) = (i % 7, (i * 5 / 3) % 2, (i / 2) % 2);
        text.push_str(&format!("{w},{a},1,0,0,{l},0,1,0,1,0,1\n"));
    }
    std::fs::write(&data, text).unwrap();
    let config = quick_config(dir.path(), &data, json!({}));
    let r = lmtp(&["estimate", "--config", s(&config)]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["failures"][0]["horizon"], 2);
    assert_eq!(report["estimates"].as_array().unwrap().len(), 1);
    assert_eq!(csv_rows(&dir.path().join("out/curve.csv")).len(), 1);
}

#[test]
fn invalid_configurations_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    simulate("d1.json", 100, 1, dir.path());
    let data = dir.path().join("data.csv");
    for extra in [json!({"censoring": {"g_floor": 0.0}}), json!({"folds": {"J": 1}}), json!({"horizons": [3]}), json!({"policy": {"kind": "static", "value": 4.0}})] {
        let config = quick_config(dir.path(), &data, extra.clone());
        assert_eq!(code(&lmtp(&["estimate", "--config", s(&config)])), 2, "{extra}");
    }
    std::fs::write(dir.path().join("typo.json"), r#"{"sed": 1}"#).unwrap();
    assert_eq!(code(&lmtp(&["estimate", "--config", s(&dir.path().join("typo.json"))])), 2);
    assert_eq!(code(&lmtp(&["estimate", "--input", "/nonexistent.csv", "--out", s(dir.path())])), 2);
    assert_eq!(code(&lmtp(&["estimate", "--config", s(&quick_config(dir.path(), &data, json!({}))), "--threads", "0"])), 2);
}

#[test]
fn simulate_is_deterministic_and_routes_the_truth_engine() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate("d1.json", 1000, 7, a.path());
    let r = lmtp(&["simulate", "--spec", s(&fixture("d1.json")), "--n", "1000", "--seed", "7", "--out", s(b.path()), "--threads", "3"]);
    assert_eq!(code(&r), 0);
    let digest = |p: &Path| lmtp::digest::file_digest(&p.join("data.csv")).unwrap();
    assert_eq!(digest(a.path()), digest(b.path()));

    let truth: Value = serde_json::from_str(&std::fs::read_to_string(a.path().join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["truth"][0]["method"], "exact");
    let r = lmtp(&["simulate", "--spec", s(&fixture("d1.json")), "--n", "10", "--out", s(b.path()), "--truth", "mc", "--replicates", "20000", "--policy", "static:1"]);
    assert_eq!(code(&r), 0);
    let mc: Value = serde_json::from_str(&std::fs::read_to_string(b.path().join("truth.json")).unwrap()).unwrap();
    assert_eq!(mc["truth"][1]["method"], "monte_carlo");
    assert_eq!(mc["truth"][1]["replicates"], 20000);
}

#[test]
fn simulate_rejects_bad_inputs_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let r = lmtp(&["simulate", "--spec", s(&fixture("d1.json")), "--n", "0", "--out", s(dir.path())]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("n must be positive"));
    let mut spec: Value = serde_json::from_str(&std::fs::read_to_string(fixture("d1.json")).unwrap()).unwrap();
    spec["tau"] = json!(5);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, spec.to_string()).unwrap();
    assert_eq!(code(&lmtp(&["simulate", "--spec", s(&bad), "--n", "5", "--out", s(dir.path())])), 2);
}

fn benchmark_config(dir: &Path, spec: &Path, policy: Value, replicates: usize, n: usize) -> PathBuf {
    let c = json!({
        "spec": spec,
        "policy": policy,
        "estimators": ["sdr"],
        "n": [n],
        "replicates": replicates,
        "seed": 2,
        "folds": 3,
        "arms": [{"name": "glm", "outcome": [{"name": "glm"}]}]
    });
    let path = dir.join("bench.json");
    std::fs::write(&path, c.to_string()).unwrap();
    path
}

#[test]
fn benchmark_minimal_grid_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = benchmark_config(dir.path(), &fixture("d1.json"), json!({"kind": "static", "value": 1.0}), 1, 400);
    let out = dir.path().join("bench");
    let r = lmtp(&["benchmark", "--config", s(&config), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let rows = csv_rows(&out.join("summary.csv"));
    assert_eq!(rows.len(), 1);
    let header = csv::Reader::from_path(out.join("summary.csv")).unwrap().headers().unwrap().clone();
    for col in ["bias", "sd", "coverage"] {
        assert!(header.iter().any(|h| h == col));
    }
}

#[test]
fn benchmark_identity_cell_is_unbiased() {
    let dir = tempfile::tempdir().unwrap();
    let config = benchmark_config(dir.path(), &fixture("d1.json"), json!({"kind": "identity"}), 30, 500);
    let cells = lmtp::commands::benchmark::run(
        &lmtp::commands::benchmark::BenchmarkConfig::load(&config).unwrap(),
        dir.path(),
        &dir.path().join("bench"),
    )
    .unwrap();
    let c = &cells[0];
    assert_eq!(c.failures, 0);
    assert!(c.bias.abs() < 3.0 * c.sd / (c.replicates as f64).sqrt(), "{c:?}");
}

#[test]
fn benchmark_rejects_continuous_specs() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec: Value = serde_json::from_str(&std::fs::read_to_string(fixture("d1.json")).unwrap()).unwrap();
    spec["steps"][0]["covariates"][0] = json!({"gaussian": {"intercept": 0.0, "sd": 1.0}});
    let path = dir.path().join("continuous.json");
    std::fs::write(&path, spec.to_string()).unwrap();
    let config = benchmark_config(dir.path(), &path, json!({"kind": "identity"}), 1, 100);
    let r = lmtp(&["benchmark", "--config", s(&config), "--out", s(dir.path())]);
    assert_eq!(code(&r), 2, "{}", stderr(&r));
}
