use std::path::Path;
use std::process::{Command, Output};

fn rulxai(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rulxai"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("RULXAI_SEED")
        .output()
        .expect("binary runs")
}

fn simulate(dir: &Path) -> String {
    let data = dir.join("train.txt");
    let o = rulxai(dir, &["simulate", "--output", data.to_str().unwrap()]);
    assert!(o.status.success());
    data.to_str().unwrap().to_string()
}

#[test]
fn missing_data_file_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rulxai(tmp.path(), &["ingest", "--data", "/nonexistent/train.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/train.txt"));
}

#[test]
fn unknown_method_and_bad_seed_are_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());
    assert!(rulxai(tmp.path(), &["ingest", "--data", &data]).status.success());
    assert_eq!(rulxai(tmp.path(), &["select", "--method", "magic"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_rulxai"))
        .args(["ingest", "--data", &data, "--out"])
        .arg(tmp.path())
        .env("RULXAI_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_unit_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());
    assert_eq!(rulxai(tmp.path(), &["ingest", "--data", &data, "--unit", "99"]).status.code(), Some(2));
}

#[test]
fn staged_run_writes_outputs_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());
    let out = tmp.path().join("out");
    for args in [
        &["ingest", "--data", data.as_str()][..],
        &["select", "--max-features", "6"],
        &["train", "--models", "tree,figs"],
        &["explain", "--model", "tree", "--method", "pfi,shap", "--sample", "3"],
        &["diagnose", "--model", "tree", "--test", "accuracy,resilience"],
        &["report"],
    ] {
        let o = rulxai(&out, args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let selected = std::fs::read_to_string(out.join("select/selected_features.txt")).unwrap();
    assert_eq!(selected.lines().count(), 6);
    assert!(out.join("train/tree.json").exists());
    assert!(out.join("manifest.json").exists());
    let report = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert!(report.contains("not run"));
}

#[test]
fn too_many_shapley_features_is_a_computation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(tmp.path());
    let out = tmp.path().join("out");
    assert!(rulxai(&out, &["ingest", "--data", &data]).status.success());
    assert!(rulxai(&out, &["select"]).status.success());
    assert!(rulxai(&out, &["train", "--models", "tree"]).status.success());
    let o = rulxai(&out, &["explain", "--model", "tree", "--method", "shap", "--max-shapley-features", "5"]);
    assert_eq!(o.status.code(), Some(3));
}
