mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use bilip::extension::{ExtensionConfig, ProblemFile};
use bilip::space_gallery::grid_id;
use bilip::VertexId;
use serde_json::Value;

fn bilip(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bilip")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn grid(dir: &Path, dim: usize, side: usize) -> std::path::PathBuf {
    let space = dir.join(format!("grid{dim}_{side}.json"));
    let side = side.to_string();
    let dim = dim.to_string();
    let (code, _) = bilip(&["gen-space", "--kind", "grid", "--dim", &dim, "--side", &side, "--out", p(&space)]);
    assert_eq!(code, 0);
    space
}

fn row_problem(dir: &Path) -> std::path::PathBuf {
    let pairs: Vec<(f64, VertexId)> = [0usize, 3, 8].iter().map(|&t| (t as f64, grid_id(&[t, 4, 4], 9))).collect();
    let path = dir.join("problem.json");
    fs::write(&path, serde_json::to_vec(&ProblemFile::new(&pairs, ExtensionConfig::default())).unwrap()).unwrap();
    path
}

#[test]
fn gen_space_writes_manifest_with_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let space = grid(dir.path(), 2, 5);
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("grid2_5.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "gen-space");
    assert_eq!(manifest["exit_code"], 0);
    let digest = bilip::cli::sha256_hex(&fs::read(&space).unwrap());
    assert_eq!(manifest["outputs"][p(&space)], Value::String(digest));
}

#[test]
fn extend_then_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let space = grid(dir.path(), 3, 9);
    let problem = row_problem(dir.path());
    let (out, report) = (dir.path().join("F.json"), dir.path().join("report.json"));
    let (code, _) = bilip(&["extend", "--space", p(&space), "--problem", p(&problem), "--out", p(&out), "--report", p(&report)]);
    assert_eq!(code, 0);
    let (code, stdout) = bilip(&["verify", "--report", p(&report)]);
    assert_eq!(code, 0);
    let manifest: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(manifest["command"], "verify");
}

#[test]
fn verify_flags_a_failed_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let doc = serde_json::json!({ "certificates": [
        { "clause": "endpoints preserved", "passed": true },
        { "clause": "component diameter bound", "passed": false },
    ]});
    fs::write(&report, doc.to_string()).unwrap();
    assert_eq!(bilip(&["verify", "--report", p(&report)]).0, 2);

    fs::write(&report, "{}").unwrap();
    assert_eq!(bilip(&["verify", "--report", p(&report)]).0, 1);
}

#[test]
fn crossing_sheets_is_a_certified_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (pp, pairs) = common::plane_pair_control();
    let space = dir.path().join("space.json");
    let mut bytes = Vec::new();
    pp.space.write_json(&mut bytes).unwrap();
    fs::write(&space, bytes).unwrap();
    let problem = dir.path().join("problem.json");
    fs::write(&problem, serde_json::to_vec(&ProblemFile::new(&pairs, ExtensionConfig::default())).unwrap()).unwrap();
    let out = dir.path().join("F.json");
    let (code, _) = bilip(&["extend", "--space", p(&space), "--problem", p(&problem), "--out", p(&out)]);
    assert_eq!(code, 2);
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("F.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 2);
    assert!(manifest["error"].as_str().is_some_and(|e| !e.is_empty()));
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(bilip(&["extend", "--no-such-flag"]).0, 1);
    assert_eq!(bilip(&["frobnicate"]).0, 1);
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(bilip(&["verify", "--report", p(&missing)]).0, 1);
    assert_eq!(bilip(&["--help"]).0, 0);
}

#[test]
fn extend_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let space = grid(dir.path(), 3, 9);
    let problem = row_problem(dir.path());
    let outputs: Vec<Vec<u8>> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("F{k}.json"));
            let (code, _) = bilip(&["--seed", "7", "extend", "--space", p(&space), "--problem", p(&problem), "--out", p(&out)]);
            assert_eq!(code, 0);
            fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn straighten_and_whitney_run() {
    let dir = tempfile::tempdir().unwrap();
    let space_path = grid(dir.path(), 3, 8);
    let space = bilip::Space::read_json(fs::read(&space_path).unwrap().as_slice()).unwrap();
    let sigma = common::grid_curve(&space, &common::wiggly_curves(8, 1, 5)[0]);
    let curve = dir.path().join("sigma.csv");
    let mut bytes = Vec::new();
    sigma.write_csv(&space, &mut bytes).unwrap();
    fs::write(&curve, bytes).unwrap();
    let (out, report) = (dir.path().join("gamma.csv"), dir.path().join("straighten.json"));
    let (code, _) = bilip(&["straighten", "--space", p(&space_path), "--curve", p(&curve), "--out", p(&out), "--report", p(&report)]);
    assert_eq!(code, 0);
    assert_eq!(bilip(&["verify", "--report", p(&report)]).0, 0);

    let a = dir.path().join("A.json");
    fs::write(&a, "[0, 1, 3, 7.5, 20]").unwrap();
    let (code, _) = bilip(&["whitney", "--A", p(&a), "--out", p(&dir.path().join("whitney.json"))]);
    assert_eq!(code, 0);
}
