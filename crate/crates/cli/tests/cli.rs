use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lrfim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrfim")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn chain_model(n: usize) -> String {
    let spins: Vec<String> = (0..n)
        .map(|i| format!(r#"{{"id":{i},"pos":[{i},0],"field":{}}}"#, ((i * 7 % 11) as f64 - 5.0) / 5.0))
        .collect();
    format!(r#"{{"kind":"long_range","alpha":2,"c":-1,"spins":[{}]}}"#, spins.join(","))
}

const PATH3: &str = r#"{"vertices":[{"id":0,"pos":[0,0]},{"id":1,"pos":[1,0]},{"id":2,"pos":[2,0]}]}"#;

#[test]
fn solve_single_spin() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "m.json", r#"{"kind":"explicit","spins":[{"id":0,"field":1}],"edges":[]}"#);
    let out = lrfim(&["solve", "--model", &m]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["energy"].as_f64(), Some(-1.0));
    assert_eq!(v["states"], serde_json::json!(["+"]));
    assert!(v.get("gap").is_none());
    let k = json(&lrfim(&["solve", "--model", &m, "--k", "1"]));
    assert_eq!(k["gap"].as_f64(), Some(2.0));
}

#[test]
fn approx_chain_is_within_budget_of_solve() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "chain20.json", &chain_model(20));
    let approx = lrfim(&["approx", "--model", &m, "--epsilon", "0.1"]);
    assert!(approx.status.success(), "{}", String::from_utf8_lossy(&approx.stderr));
    let a = json(&approx);
    assert_eq!(a["certified"], Value::Bool(true));
    let exact = json(&lrfim(&["solve", "--model", &m]))["energy"].as_f64().unwrap();
    let e = a["energy"].as_f64().unwrap();
    assert!(e >= exact - 1e-12 && e - exact <= 20.0 * 0.1);
}

#[test]
fn approx_with_supplied_decomposition() {
    let dir = TempDir::new().unwrap();
    let m = write(
        dir.path(),
        "tree.json",
        r#"{"kind":"explicit","spins":[{"id":0,"field":0.3},{"id":1,"field":-0.2},{"id":2,"field":0.1},{"id":3}],
            "edges":[{"u":0,"v":1,"J":-1},{"u":1,"v":2,"J":0.5},{"u":1,"v":3,"J":-0.7}]}"#,
    );
    let d = write(dir.path(), "d.json", r#"{"bags":[[0,1],[1,2],[1,3]],"tree":[[0,1],[0,2]]}"#);
    let out = json(&lrfim(&["approx", "--model", &m, "--epsilon", "0.1", "--decomp", &d]));
    let exact = json(&lrfim(&["solve", "--model", &m]));
    assert_eq!(out["width"], 1);
    assert_eq!(out["energy"].as_f64(), exact["energy"].as_f64());

    let bad = write(dir.path(), "bad.json", r#"{"bags":[[0,1],[2,3]],"tree":[[0,1]]}"#);
    let out = lrfim(&["approx", "--model", &m, "--epsilon", "0.1", "--decomp", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn compile_solve_decode_round_trip() {
    let dir = TempDir::new().unwrap();
    let mis = write(dir.path(), "path3.json", PATH3);
    let bundle = dir.path().join("bundle");
    let bundle = bundle.to_str().unwrap();
    let c = lrfim(&["compile", "--mis", &mis, "--alpha", "12", "--t", "0", "--out", bundle]);
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    assert_eq!(json(&c)["grid_spins"], 3);
    let grid = format!("{bundle}/layer_2.json");
    let solved = lrfim(&["solve", "--model", &grid]);
    let state = write(dir.path(), "ground.json", &String::from_utf8(solved.stdout).unwrap());
    let decoded = json(&lrfim(&["decode", "--bundle", bundle, "--state", &state]));
    assert_eq!(decoded["independent_set"], serde_json::json!([0, 2]));
    let verified = lrfim(&["verify", "bundle", "--bundle", bundle]);
    assert!(verified.status.success());
    assert_eq!(json(&verified)["passed"], Value::Bool(true));
}

#[test]
fn corrupted_gadget_is_bad_input() {
    let dir = TempDir::new().unwrap();
    let mis = write(dir.path(), "two.json", r#"{"vertices":[{"id":0,"pos":[0,0]},{"id":1,"pos":[1,0]}]}"#);
    let bundle = dir.path().join("b");
    let bundle = bundle.to_str().unwrap();
    let c = lrfim(&["compile", "--mis", &mis, "--alpha", "4", "--t", "1", "--out", bundle]);
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    assert_eq!(json(&c)["grid_spins"], 16);
    let good = lrfim(&["decode", "--bundle", bundle, "--state", "----++++++++----"]);
    assert_eq!(json(&good)["nn_state"], "-+");
    let broken = lrfim(&["decode", "--bundle", bundle, "--state", "----++++++-+----"]);
    assert_eq!(broken.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("gadget"));
}

#[test]
fn exit_codes() {
    assert_eq!(lrfim(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lrfim(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(lrfim(&["solve", "--model", "/nonexistent.json"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "c.json", &chain_model(12));
    let guarded = lrfim(&["--limit-n", "10", "solve", "--model", &m]);
    assert_eq!(guarded.status.code(), Some(3));
    assert!(guarded.stdout.is_empty());
    // The closed-form gap disagrees with enumeration, so this check fails.
    assert_eq!(lrfim(&["verify", "gadget", "--alpha", "2"]).status.code(), Some(1));
    assert_eq!(lrfim(&["verify", "law", "--alpha", "1"]).status.code(), Some(0));
}

#[test]
fn seeded_single_worker_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let m = write(dir.path(), "c.json", &chain_model(14));
    let args = ["--workers", "1", "--seed", "7", "solve", "--model", &m, "--k", "3"];
    assert_eq!(lrfim(&args).stdout, lrfim(&args).stdout);
    let bench = ["--workers", "1", "bench", "--n", "12,24"];
    let strip = |o: Output| -> Vec<String> {
        String::from_utf8(o.stdout).unwrap().lines().map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("{},{},{},{}", f[0], f[1], f[2], f[4])
        }).collect()
    };
    // Wall time aside, the benchmark is deterministic.
    assert_eq!(strip(lrfim(&bench)), strip(lrfim(&bench)));
}

#[test]
fn gadget_csv_has_header_and_rows() {
    let out = lrfim(&["gadget", "--alpha", "2", "--r", "10,20,40"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,r,I12,theory,residual_scaled");
    assert_eq!(lines.len(), 4);
    let i12: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!(i12 < 0.0);
}

#[test]
fn nn_audit_reports_threshold_rows() {
    let dir = TempDir::new().unwrap();
    let mis = write(dir.path(), "path3.json", PATH3);
    let out = lrfim(&["verify", "nn", "--mis", &mis]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["ground_energy"].as_f64(), Some(-3.0));
    assert_eq!(v["rows"][2]["bound"].as_f64(), Some(-6.5));
    assert_eq!(v["rows"][2]["attained"], Value::Bool(false));
}
