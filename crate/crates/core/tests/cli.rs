use std::path::PathBuf;
use std::process::Command;

use expfact::cli::{run, EXIT_OK, EXIT_PIPELINE, EXIT_SPEC, EXIT_UNVERIFIED};
use serde_json::Value;

fn spec(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "specs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn call(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = run(std::iter::once("expfact").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn write_json(dir: &tempfile::TempDir, name: &str, v: &Value) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn factorize_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["triangular_disk.json", "general_circle.json"] {
        let cert = dir.path().join(format!("{name}.cert"));
        let cert = cert.to_str().unwrap();
        let (code, _) = call(&["factorize", &spec(name), "-o", cert]);
        assert_eq!(code, EXIT_OK, "{name}");
        let (code, out) = call(&["verify", "--replay", cert]);
        assert_eq!(code, EXIT_OK, "{name}: {out}");
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["verified"], Value::Bool(true));
    }
}

#[test]
fn output_is_deterministic() {
    let a = call(&["factorize", &spec("general_circle.json")]);
    let b = call(&["factorize", &spec("general_circle.json")]);
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a.1).unwrap();
    assert_eq!(v["factor_count"], 2);
}

#[test]
fn tampered_certificate_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = call(&["factorize", &spec("triangular_disk.json")]);
    assert_eq!(code, EXIT_OK);
    let mut cert: Value = serde_json::from_str(&out).unwrap();
    cert["factors"][0]["entries"][0] = serde_json::json!({ "poly": [[0.5, 0.0]] });
    let path = write_json(&dir, "bad.json", &cert);
    assert_eq!(call(&["verify", &path]).0, EXIT_UNVERIFIED);
}

#[test]
fn bad_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call(&["factorize", "/no/such/file.json"]).0, EXIT_SPEC);
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(call(&["spectrum", garbage.to_str().unwrap()]).0, EXIT_SPEC);
    // singular at the second point
    let singular = serde_json::json!({
        "backend": {"kind": "finite_points", "count": 2},
        "n": 1,
        "entries": [{"samples": [[1.0, 0.0], [0.0, 0.0]]}]
    });
    assert_eq!(call(&["factorize", &write_json(&dir, "s.json", &singular)]).0, EXIT_SPEC);
}

#[test]
fn pipeline_failure_exits_three_with_report() {
    // det = z winds once around the circle: no two-exponential factorization
    let dir = tempfile::tempdir().unwrap();
    let spec = serde_json::json!({
        "backend": {"kind": "circle_path", "samples": 64},
        "n": 2,
        "entries": [{"poly": [[0.0, 0.0], [1.0, 0.0]]}, {"poly": [[1.0, 0.0]]}, {"poly": [[0.0, 0.0]]}, {"poly": [[1.0, 0.0]]}]
    });
    let (code, out) = call(&["factorize", &write_json(&dir, "w.json", &spec)]);
    assert_eq!(code, EXIT_PIPELINE);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(!v["kind"].as_str().unwrap().is_empty());
    assert!(v["error"].is_string());
}

#[test]
fn other_commands() {
    let (code, out) = call(&["spectrum", &spec("general_circle.json")]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(!v["points"].as_array().unwrap().is_empty());

    let (code, out) = call(&["regroup", &spec("regroup.json")]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verified"], Value::Bool(true));

    assert_eq!(call(&["singleexp", &spec("finite_points.json")]).0, EXIT_OK);
    assert_eq!(call(&["factorize", "--normalize-nothing"]).0, EXIT_SPEC);
}

#[test]
fn demo_prints_table() {
    let (code, out) = call(&["demo", "t-counterexample", "--samples", "65", "--output", "text"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.lines().count() >= 3);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_expfact");
    let ok = Command::new(bin).args(["factorize", &spec("triangular_disk.json"), "--output", "text"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("verified=true"));
    let bad = Command::new(bin).args(["verify", "/no/such/cert.json"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_SPEC));
}
