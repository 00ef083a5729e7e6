use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn barytree(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_barytree"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn note(csv: &str, key: &str) -> String {
    let prefix = format!("# {key}: ");
    csv.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} note"))
        .to_string()
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "bad.json", "{\"command\": \"extend\", ");
    write(d, "unknown.json", r#"{"command": "extend", "bogus": 1}"#);
    write(d, "unused.json", r#"{"command": "delta", "point": [0, 0, 0]}"#);
    write(d, "mismatch.json", r#"{"command": "belt"}"#);
    for (cmd, file) in [
        ("extend", "bad.json"),
        ("extend", "unknown.json"),
        ("delta", "unused.json"),
        ("delta", "mismatch.json"),
        ("extend", "missing.json"),
    ] {
        let out = barytree(d, &[cmd, "--config", file]);
        assert_eq!(out.status.code(), Some(1), "{cmd} {file}");
        assert!(out.stdout.is_empty());
    }
    write(d, "ok.json", r#"{"command": "delta", "grid": [1]}"#);
    let out = barytree(d, &["delta", "--config", "ok.json", "--workers", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn extend_of_z_squared_fixes_origin() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::copy(configs().join("z2.json"), d.join("z2.json")).unwrap();
    write(d, "o.json", r#"{"command": "extend", "map": "z2.json", "point": [0, 0, 0]}"#);
    let v = json(&barytree(d, &["extend", "--config", "o.json"]));
    for c in v["result"]["point"].as_array().unwrap() {
        assert!(c.as_f64().unwrap().abs() < 1e-12);
    }
}

#[test]
fn extend_of_dilation_moves_origin_along_axis() {
    // A dilation by 2 moves the origin a hyperbolic distance ln 2 along the
    // axis, to Euclidean radius tanh(ln 2 / 2) = 1/3.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "m.json",
        r#"{"command": "extend", "map": {"P": [[2, 0], [0, 0]], "Q": [[0, 0], [1, 0]]}, "point": [0, 0, 0]}"#,
    );
    let v = json(&barytree(d, &["extend", "--config", "m.json"]));
    let p: Vec<f64> = v["result"]["point"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
    assert!(p[0].abs() < 1e-12 && p[1].abs() < 1e-12, "{p:?}");
    assert!((p[2].abs() - 1.0 / 3.0).abs() < 1e-12, "{p:?}");
}

#[test]
fn delta_rows_are_positive() {
    let out = barytree(configs(), &["delta", "--config", "delta.json", "--quadrature-order", "12"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let delta: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(delta > 0.0, "{row}");
    }
    assert_eq!(note(&text, "positive"), "true");
}

#[test]
fn lipscan_of_cube_is_within_bound() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "l.json",
        r#"{"command": "lipscan", "map": {"P": [[1, 0], [0, 0], [0, 0], [0, 0]], "Q": [[0, 0], [0, 0], [0, 0], [1, 0]]}, "samples": 200, "seed": 3, "quadrature_order": 16}"#,
    );
    let out = barytree(d, &["lipscan", "--config", "l.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let max: f64 = note(&text, "max_norm").parse().unwrap();
    assert!(max > 0.0 && max <= 3.0 * 12.2867, "{max}");
    assert_eq!(note(&text, "within_bound"), "true");
}

#[test]
fn treecheck_reports_fold() {
    let out = barytree(configs(), &["treecheck", "--config", "fold.json"]);
    let v = json(&out);
    assert_eq!(v["result"]["valid"], Value::Bool(true));
    assert_eq!(String::from_utf8_lossy(&out.stderr).trim(), "valid, d = 2");
}

#[test]
fn echoed_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::copy(configs().join("z2.json"), d.join("z2.json")).unwrap();
    fs::copy(configs().join("extend.json"), d.join("extend.json")).unwrap();
    let first = json(&barytree(d, &["extend", "--config", "extend.json", "--seed", "5"]));
    write(d, "echo.json", &first["meta"]["config"].to_string());
    let second = json(&barytree(d, &["extend", "--config", "echo.json"]));
    assert_eq!(first["meta"]["config_sha256"], second["meta"]["config_sha256"]);
    assert_eq!(first["meta"]["seed"], Value::from(5));
    assert_eq!(first["result"], second["result"]);
}

#[test]
fn out_flag_writes_same_bytes_as_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "g.json", r#"{"command": "delta", "grid": [1, 2]}"#);
    let stdout = barytree(d, &["delta", "--config", "g.json", "--quadrature-order", "8"]).stdout;
    let out = barytree(d, &["delta", "--config", "g.json", "--quadrature-order", "8", "--out", "x.csv"]);
    assert!(out.status.success() && out.stdout.is_empty());
    assert_eq!(fs::read(d.join("x.csv")).unwrap(), stdout);
}
