use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn isowalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isowalk")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn identity_walk() -> Value {
    json!({
        "space": {"kind": "circle"},
        "family": {"members": [[[0.0, 1.0]]]},
        "start": {"point": 0.0},
        "horizon": 4,
        "reference_points": 100
    })
}

#[test]
fn stromberg_supports_alternate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = isowalk(&["stromberg", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["verdict"], "non-convergent");
    assert_eq!(s["supports_alternate"], true);
    assert_eq!(s["supports"][0]["support"], json!(["(2 3)", "(1 2 3)"]));
    assert_eq!(s["supports"][1]["support"], json!(["Id", "(1 2)"]));
    assert_eq!(s["max_step_tv"], 1.0);
    let lines = std::fs::read_to_string(out.join("stromberg.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 500);
}

#[test]
fn ot_prints_half_for_antipodal_diracs() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", &json!({"space": {"kind": "circle"}, "atoms": [[0.0, 1.0]]}));
    let b = write(dir.path(), "b.json", &json!({"space": {"kind": "circle"}, "atoms": [[0.5, 1.0]]}));
    let plan = dir.path().join("plan.json");
    let out = dir.path().join("o");
    let o = isowalk(&["ot", "--a", &a, "--b", &b, "--plan", plan.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let w: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!((w - 0.5).abs() < 1e-12);
    assert!((read_json(&plan)["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn identity_family_gives_constant_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &identity_walk());
    let out = dir.path().join("o");
    let o = isowalk(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("converge.jsonl")).unwrap();
    let ds: Vec<f64> = text.lines().map(|l| serde_json::from_str::<Value>(l).unwrap()["distance"].as_f64().unwrap()).collect();
    assert_eq!(ds.len(), 5);
    // W(δ_0, uniform on k/100) = Σ_k min(k, 100−k)/100² = 0.25.
    assert!(ds.iter().all(|d| (d - 0.25).abs() < 1e-12));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = identity_walk();
    v["horizon"] = json!(0);
    let cfg = write(dir.path(), "h0.json", &v);
    let o = isowalk(&["converge", "--config", &cfg, "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon"));

    let mut v = identity_walk();
    v["mode"] = json!({"particles": 50});
    let cfg = write(dir.path(), "n50.json", &v);
    let o = isowalk(&["converge", "--config", &cfg, "--out", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("N ≥ 100"));

    let mut v = identity_walk();
    v["bogus_key"] = json!(1);
    let cfg = write(dir.path(), "bad.json", &v);
    assert_eq!(isowalk(&["converge", "--config", &cfg]).status.code(), Some(1));
}

#[test]
fn unknown_subcommand_exits_one() {
    assert_eq!(isowalk(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(isowalk(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_seed_is_recorded_and_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let walk = json!({
        "space": {"kind": "finite_group", "builtin": "S3"},
        "family": {"members": [[["(2 3)", 0.5], ["(1 2 3)", 0.5]]]},
        "start": {"point": "Id"},
        "horizon": 20,
        "mode": {"particles": 500}
    });
    let cfg = write(dir.path(), "c.json", &walk);
    let (o1, o2) = (dir.path().join("o1"), dir.path().join("o2"));
    assert_eq!(isowalk(&["converge", "--config", &cfg, "--out", o1.to_str().unwrap()]).status.code(), Some(0));
    let manifest = read_json(&o1.join("manifest.json"));
    let seed = manifest["seed"].as_u64().expect("seed filled in");
    assert_eq!(manifest["config"]["seed"].as_u64(), Some(seed));
    assert_eq!(manifest["command"], "converge");
    let m = o1.join("manifest.json");
    assert_eq!(isowalk(&["converge", "--config", m.to_str().unwrap(), "--out", o2.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(std::fs::read(o1.join("converge.jsonl")).unwrap(), std::fs::read(o2.join("converge.jsonl")).unwrap());
}

#[test]
fn normalised_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = identity_walk();
    v["seed"] = json!(7);
    let cfg = write(dir.path(), "c.json", &v);
    let o1 = dir.path().join("o1");
    isowalk(&["converge", "--config", &cfg, "--out", o1.to_str().unwrap()]);
    let first = read_json(&o1.join("manifest.json"))["config"].clone();
    let cfg2 = write(dir.path(), "c2.json", &first);
    let o2 = dir.path().join("o2");
    isowalk(&["converge", "--config", &cfg2, "--out", o2.to_str().unwrap()]);
    assert_eq!(read_json(&o2.join("manifest.json"))["config"], first);
}

#[test]
fn csv_output_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &identity_walk());
    let out = dir.path().join("o");
    let o = isowalk(&["converge", "--config", &cfg, "--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("converge.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains("distance"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn analyze_group_reports_coset_trap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = isowalk(&["analyze-group", "--group", "S3", "--support", "(2 3);(1 2 3)", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["subgroups"], 6);
    assert_eq!(s["normal_subgroups"], 3);
    assert_eq!(s["adapted"], true);
    assert_eq!(s["strictly_aperiodic"], true);
    assert_eq!(s["coset_aperiodic"], false);
}

#[test]
fn probe_finds_window_for_mixing_walk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        &json!({
            "space": {"kind": "finite_group", "builtin": "S3"},
            "family": {"members": [[["(2 3)", 0.5], ["(1 2 3)", 0.5]]]},
            "seed": 5
        }),
    );
    let out = dir.path().join("o");
    assert_eq!(isowalk(&["probe-sa", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let s = read_json(&out.join("summary.json"));
    assert!(s["m"].as_u64().is_some());
    assert_eq!(s["revalidation"]["passed"], true);
}
