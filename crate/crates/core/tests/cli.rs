use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use zil_graph::zoo::{Model, ModelFile};

fn zil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zil-graph")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_level_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("skip.json");
    let levelled = dir.path().join("skip_level.json");
    let dot = dir.path().join("skip.dot");

    let out = zil(&["build", "--family", "skip_toy", "--out", path(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let file: ModelFile = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert!(!Model::from_file(&file).unwrap().graph.is_levelled());

    let out = zil(&["level", path(&model), "--out", path(&levelled), "--dot", path(&dot)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("inserted 2 identity vertices"));
    let file: ModelFile = serde_json::from_str(&fs::read_to_string(&levelled).unwrap()).unwrap();
    let m = Model::from_file(&file).unwrap();
    assert!(m.graph.is_levelled());
    assert_eq!(m.graph.len(), 10);
    let dot_text = fs::read_to_string(&dot).unwrap();
    assert!(dot_text.starts_with("digraph"));
    assert!(dot_text.contains("palegreen"));

    let out = zil(&["export-dot", path(&model)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("digraph"));
}

#[test]
fn grad_check_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("mlp.json");
    let csv = dir.path().join("gc.csv");
    assert!(zil(&["build", "--family", "mlp", "--dims", "3,4,1", "--seed", "7", "--out", path(&model)])
        .status
        .success());
    let out = zil(&["grad-check", path(&model), "--out", path(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "param,component,analytic,numeric,rel_error");
    // 3×4 + 4 weights
    assert_eq!(text.lines().count(), 1 + 16);
}

#[test]
fn equiv_with_config_file_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let res = dir.path().join("res.json");
    fs::write(&cfg, r#"{"models": [{"family": "residual", "dims": [3, 3, 3, 1]}], "seeds": [0, 1, 2]}"#).unwrap();
    let out = zil(&["equiv", "--config", path(&cfg), "--format", "json", "--out", path(&res)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&res).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
    assert_eq!(v["config"]["seeds"], serde_json::json!([0, 1, 2]));
    assert!(v["code_version"].as_str().unwrap().contains('+'));
}

#[test]
fn failing_criterion_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // a positive threshold no divergence can exceed
    fs::write(
        &cfg,
        r#"{"models": [{"family": "toy_attention", "dims": [3]}], "seeds": [0], "positive_threshold": 1e9}"#,
    )
    .unwrap();
    let out = zil(&["equiv", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn ablate_single_seed_csv() {
    let out = zil(&["ablate", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    // 8 default models × 3 ablations
    assert_eq!(text.lines().count(), 1 + 24);
}

#[test]
fn usage_and_io_errors_exit_with_two() {
    assert_eq!(zil(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(zil(&["level", "/nonexistent/graph.json"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"il_steps": 5, "repetitions": 2, "warmup": 0}"#).unwrap();
    assert_eq!(zil(&["bench", "--config", path(&cfg)]).status.code(), Some(2));
}
