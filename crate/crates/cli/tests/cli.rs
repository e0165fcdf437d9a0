use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fixsim(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fixsim"));
    cmd.args(args).env_remove("FIXSIM_CELL_BUDGET");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn grid_json() {
    let out = fixsim(&["grid", "--n", "2", "--m", "4"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["cells"].as_array().unwrap().len(), 16);
    assert_eq!(v["vertices"].as_array().unwrap().len(), 15);
    assert_eq!(v["vertices"][0], serde_json::json!([0, 0, 4]));
}

#[test]
fn zero_subdivision_is_invalid_input() {
    assert_eq!(fixsim(&["grid", "--n", "2", "--m", "0"], &[]).status.code(), Some(2));
}

#[test]
fn cell_budget_gives_resource_limit() {
    let out = fixsim(&["grid", "--n", "3", "--m", "10"], &[("FIXSIM_CELL_BUDGET", "100")]);
    assert_eq!(out.status.code(), Some(4));
    let out = fixsim(&["grid", "--n", "2", "--m", "2"], &[("FIXSIM_CELL_BUDGET", "lots")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn label_then_sperner() {
    let dir = tempfile::tempdir().unwrap();
    let lab = dir.path().join("lab.json");
    let out = fixsim(&["label", "--n", "2", "--m", "6", "--map", "rotate", "--out", path(&lab)], &[]);
    assert_eq!(out.status.code(), Some(0));
    let exact = fixsim(&["--rational", "label", "--n", "2", "--m", "6", "--map", "rotate"], &[]);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&lab).unwrap()).unwrap();
    assert_eq!(json(&exact), file);

    let out = fixsim(&["sperner", "--labeling", path(&lab), "--strategy", "path"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["count"].as_u64().unwrap() % 2, 1);
    assert_eq!(v["firstCell"].as_array().unwrap().len(), 3);
}

#[test]
fn fixpoint_statuses() {
    let out = fixsim(&["--threads", "2", "fixpoint", "--n", "2", "--map", "rotate", "--tol", "1e-6"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "Converged");
    assert!(v["residual"].as_f64().unwrap() <= 1e-6);
    assert!(v["trace"][0]["m"].is_u64());

    let out = fixsim(&["fixpoint", "--n", "2", "--map", "identity"], &[]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["status"], "NonContractionWitness");
    assert!(json(&out)["witness"].is_object());
}

#[test]
fn fixpoint_single_grid_and_exact_residual() {
    let map = "g0 = 0.5*x1 + 0.2; g1 = x2; g2 = x0";
    let out = fixsim(
        &["--rational", "fixpoint", "--n", "2", "--map", map, "--lipschitz", "2", "--eps", "0.05"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["residual"].as_f64().unwrap() <= v["bound"].as_f64().unwrap());
    assert!(v["exactResidual"].as_str().unwrap().contains('/') || v["exactResidual"] == "0");
}

#[test]
fn expression_map_needs_a_modulus() {
    let out = fixsim(&["fixpoint", "--n", "1", "--map", "g0 = x1; g1 = x0"], &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = fixsim(&["fixpoint", "--n", "1", "--map", "g0 = x1; g1 = x0", "--estimate-modulus"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["heuristicModulus"], true);
}

#[test]
fn bad_map_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.map");
    std::fs::write(&f, "g0 = x0 +\ng1 = x1\ng2 = x2\n").unwrap();
    let out = fixsim(&["fixpoint", "--n", "2", "--map-file", path(&f), "--lipschitz", "1"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax error"));
}

#[test]
fn converse_exact_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let lab = dir.path().join("lab.json");
    fixsim(&["label", "--n", "2", "--m", "5", "--random-seed", "3", "--out", path(&lab)], &[]);

    let v = json(&fixsim(&["converse", "--labeling", path(&lab)], &[]));
    assert_eq!(v["exact"], true);
    assert!(v["tau"].as_str().unwrap().contains('/'));
    assert_eq!(v["fixedPoint"].as_array().unwrap().len(), 3);

    let out = fixsim(&["converse", "--labeling", path(&lab), "--solve", "--tau", "1/20"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["tau"], "1/20");
    assert!(v["solver"]["residual"].as_f64().unwrap() <= 1e-6);

    assert_eq!(fixsim(&["converse", "--labeling", path(&lab), "--tau", "1"], &[]).status.code(), Some(2));
    assert_eq!(fixsim(&["converse", "--labeling", path(&lab), "--tau", "x"], &[]).status.code(), Some(2));
}

#[test]
fn converse_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let lab = dir.path().join("lab.json");
    fixsim(&["label", "--n", "1", "--m", "2", "--random-seed", "1", "--out", path(&lab)], &[]);
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&lab).unwrap()).unwrap();
    for e in v["labels"].as_array_mut().unwrap() {
        e["l"] = Value::from(0);
    }
    std::fs::write(&lab, v.to_string()).unwrap();
    let out = fixsim(&["converse", "--labeling", path(&lab)], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!json(&out)["violations"].as_array().unwrap().is_empty());
}

#[test]
fn render_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("g.svg");
    let out = fixsim(&["render", "--n", "2", "--m", "4", "--map", "rotate", "--out", path(&svg)], &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("cell full"));
    assert_eq!(fixsim(&["render", "--n", "3", "--m", "2"], &[]).status.code(), Some(2));
}
