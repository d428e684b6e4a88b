//! End-to-end runs of the binary.

use std::process::{Command, Output};

fn orthoflow(args: &[&str], dir: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orthoflow")).args(args).current_dir(dir).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn costa_solves_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let out = orthoflow(&["solve", "0", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["reflexive"], true);
    assert!(v["height"].as_f64().unwrap() < 1e-10);
}

#[test]
fn dh11_solve_prints_a_reflexive_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = orthoflow(&["solve", "1", "1", "--out", "s.json", "--trace", "t.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["reflexive"], true);
    let points = v["polygon"]["prevertices"].as_array().unwrap().len();
    assert_eq!(v["polygon"]["labels"].as_array().unwrap().len(), points + 1);
    let saved: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(saved, v);
    let trace = std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert!(trace.lines().count() >= 1);
}

#[test]
fn obstructed_configurations_exit_3_with_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = orthoflow(&["nonexist", "3", "1"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("DH_{3,1} admits no reflexive pair"));
    assert!(text.contains("contradiction"));
    assert_eq!(orthoflow(&["solve", "2", "1"], dir.path()).status.code(), Some(3));
    assert_eq!(orthoflow(&["nonexist", "1", "2"], dir.path()).status.code(), Some(0));
}

#[test]
fn malformed_flags_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["solve", "x", "1"][..], &["mesh", "1", "1"], &["develop"], &["--jobs"]] {
        let out = orthoflow(args, dir.path());
        assert_eq!(out.status.code(), Some(64), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    }
}

#[test]
fn inadmissible_coordinates_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), "[5.0, 5.0]").unwrap();
    assert_eq!(orthoflow(&["height", "1", "1", "--coords", "c.json"], dir.path()).status.code(), Some(4));
}

#[test]
fn manifest_replay_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--jobs", "2", "mesh", "1", "1", "--resolution", "24", "--out", "a.ply", "--manifest", "m.json"];
    let out = orthoflow(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out);
    assert_eq!(summary["genus"], 3);
    assert_eq!(summary["boundary_loops"], 5);
    let first = std::fs::read(dir.path().join("a.ply")).unwrap();
    std::fs::remove_file(dir.path().join("a.ply")).unwrap();
    let again = orthoflow(&["replay", "m.json"], dir.path());
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(again.stdout, out.stdout);
    assert_eq!(std::fs::read(dir.path().join("a.ply")).unwrap(), first);
}

#[test]
fn develop_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = orthoflow(&["develop", "1", "1", "--svg", "d.svg"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("d.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn monodromy_reads_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"prevertices":[-2.0,-1.0,0.0,0.01,1.0,2.5],"exponents":[1,-1,1,-3,3,-1],"j":2,"delta0":0.01}"#;
    std::fs::write(dir.path().join("s.json"), spec).unwrap();
    let out = orthoflow(&["monodromy", "--config", "s.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let w = &json(&out)["winding"];
    assert!((w[0].as_f64().unwrap() - 1.0).abs() < 1e-6);
}
