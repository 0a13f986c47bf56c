//! Command-line behaviour: exit codes, formats, files and guards.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tvq_core::circuits::circuit_from_json;

fn tvq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvq")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn build(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name).display().to_string();
    let mut full = vec!["lattice", "build"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", &path]);
    assert!(tvq(&full).status.success());
    path
}

#[test]
fn verify_fusion_passes_and_reports_residuals() {
    let out = tvq(&["verify", "fusion"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["config"]["command"], "verify");
    assert_eq!(r["config"]["tolerances"]["fusion"], 1e-12);
    let names: Vec<_> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["fusion/f_block_orthogonality", "fusion/pentagon_coherence", "fusion/f_block_tau"]);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["measured"].as_f64().unwrap() < 1e-12));
}

#[test]
fn corrupted_or_malformed_fusion_data_fails() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("f.json");
    assert!(tvq(&["fusion", "export", "--out", good.to_str().unwrap()]).status.success());
    assert_eq!(tvq(&["verify", "fusion", "--fusion-file", good.to_str().unwrap()]).status.code(), Some(0));

    let mut dump: Value = serde_json::from_str(&std::fs::read_to_string(&good).unwrap()).unwrap();
    let entry = &mut dump["fsym"][1][1][1][1][0][1];
    *entry = Value::from(entry.as_f64().unwrap() * 1.01);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, dump.to_string()).unwrap();
    let out = tvq(&["verify", "fusion", "--fusion-file", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], false);

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{\"labels\": 3}").unwrap();
    let out = tvq(&["verify", "fusion", "--fusion-file", junk.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parsing F-data"));
}

#[test]
fn tolerance_flag_is_applied_and_recorded() {
    let out = tvq(&["verify", "fusion", "--tol", "1e-20"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["config"]["tolerances"]["fusion"], 1e-20);
}

#[test]
fn ground_dim_of_built_lattices() {
    let dir = tempfile::tempdir().unwrap();
    let theta = build(dir.path(), "theta.json", &["theta"]);
    let torus = build(dir.path(), "torus.json", &["torus", "--size", "2,2"]);
    assert_eq!(json(&tvq(&["ground-dim", &theta]))["data"]["dimension"], 1);
    assert_eq!(json(&tvq(&["ground-dim", &torus]))["data"]["dimension"], 4);
    assert_eq!(tvq(&["ground-dim", &torus, "--expect", "4"]).status.code(), Some(0));
    assert_eq!(tvq(&["ground-dim", &torus, "--expect", "3"]).status.code(), Some(1));

    let missing = dir.path().join("missing.json");
    let out = tvq(&["ground-dim", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.json"), "not json").unwrap();
    assert_eq!(tvq(&["ground-dim", dir.path().join("bad.json").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn text_and_csv_formats_render_the_same_checks() {
    let dir = tempfile::tempdir().unwrap();
    let theta = build(dir.path(), "theta.json", &["theta"]);
    let text = String::from_utf8(tvq(&["ground-dim", &theta, "--expect", "1", "--format", "text"]).stdout).unwrap();
    assert!(text.starts_with("ground-dim: PASS\n"));
    assert!(text.contains("dimension: 1"));
    let csv = String::from_utf8(tvq(&["ground-dim", &theta, "--expect", "1", "--format", "csv"]).stdout).unwrap();
    assert_eq!(csv, "check,measured,comparison,limit,passed\nground_dim,1e0,equal,1e0,true\n");
}

#[test]
fn braid_guards_distance() {
    for d in ["3", "2", "10"] {
        let out = tvq(&["braid", "--distance", d]);
        assert_eq!(out.status.code(), Some(2), "d={d}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("braid distance"));
    }
}

#[test]
fn errors_emits_csv_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    let out = tvq(&[
        "errors",
        "--distances",
        "4,6",
        "--trials",
        "30",
        "--seed",
        "5",
        "--no-lightcone",
        "--rows",
        rows.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["config"]["seed"], 5);
    assert_eq!(r["data"]["stretch_summary"].as_array().unwrap().len(), 2);
    let table = std::fs::read_to_string(&rows).unwrap();
    assert!(table.starts_with("d,trial,initial_len,final_len,ratio\n"));
    assert_eq!(table.lines().count(), 61);
    let csv =
        tvq(&["errors", "--distances", "4,6", "--trials", "30", "--seed", "5", "--no-lightcone", "--format", "csv"]);
    assert_eq!(String::from_utf8(csv.stdout).unwrap(), table);
    assert_ne!(tvq(&["errors", "--distances", "4", "--trials", "0"]).status.code(), Some(0));
}

#[test]
fn compile_emits_importable_circuits() {
    let dir = tempfile::tempdir().unwrap();
    let torus = build(dir.path(), "torus.json", &["torus", "--size", "3,3"]);
    let out = tvq(&["compile", "fmove", "--lattice", &torus, "--edge", "4"]);
    assert!(out.status.success());
    let c = circuit_from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(c.depth() > 0);
    let out = tvq(&["compile", "split", "--lattice", &torus, "--triangle", "0"]);
    assert!(circuit_from_json(&String::from_utf8(out.stdout).unwrap()).unwrap().gate_count() > 0);
    assert_eq!(tvq(&["compile", "fmove", "--lattice", &torus, "--edge", "9999"]).status.code(), Some(2));
}
