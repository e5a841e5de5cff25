use std::process::{Command, Output};

use oqho_cli::config::fixture_digest;
use serde_json::Value;

fn oqho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oqho"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).expect("valid JSON")
}

fn write_config(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const TINY_INLINE: &str = r#"{"n": 2, "m": 2, "theta": [[0, 0.5], [-0.5, 0]],
    "R": [[0, 0], [0, 0]], "M": [[1, 0], [0, 1]], "Pi": [[1, 0], [0, 1]],
    "theta_list": [0.1], "mc": {"h": 0.1, "steps": 5, "paths": 500, "seed": 3}}"#;

#[test]
fn fixture_hash_is_pinned() {
    assert_eq!(
        fixture_digest("paper-example").unwrap(),
        "21011f30498229e74a385443aaefa629a2ca870b8f8841db0e16fb2cfc691644"
    );
    assert_eq!(
        fixture_digest("tiny").unwrap(),
        "1159e321c3ee081c4e29b0d7c0753c0a6ebf43db013016ff91dd8ae9952ce56b"
    );
}

#[test]
fn analyze_example_reports_published_rates() {
    let out = oqho(&["analyze", "--fixture", "paper-example"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    let quartic = &report["quartic"];
    let mean = quartic["mean_rate"].as_f64().unwrap();
    let var = quartic["variance_rate"].as_f64().unwrap();
    assert!((mean / 74.9147 - 1.0).abs() < 2e-3);
    assert!((var / 8.9399e3 - 1.0).abs() < 2e-3);
    assert!((quartic["theta0"].as_f64().unwrap() - 0.0168).abs() < 5e-4);
    assert_eq!(
        report["provenance"]["fixture_sha256"],
        "21011f30498229e74a385443aaefa629a2ca870b8f8841db0e16fb2cfc691644"
    );
    assert!(report["provenance"].get("wall_clock_seconds").is_none());
}

#[test]
fn tiny_threshold_is_tagged_infinity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "tiny.json", TINY_INLINE);
    let out = oqho(&["analyze", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["quartic"]["theta0"], serde_json::json!({"inf": true}));
    assert_eq!(report["model"]["source"], "inline");
    assert_eq!(report["classical"]["quadform_variance"].as_f64(), Some(1.0));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "tiny.json", TINY_INLINE);
    let a = oqho(&["analyze", "--config", &cfg, "--seed", "11"]);
    let b = oqho(&["analyze", "--config", &cfg, "--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["provenance"]["seed"], 11);
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "bad.json", "{\n  \"n\": 2,\n  \"m\": ]\n}");
    let out = oqho(&["analyze", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn input_errors_exit_one() {
    assert_eq!(oqho(&["analyze", "--fixture", "nope"]).status.code(), Some(1));
    assert_eq!(oqho(&["analyze"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let unstable = write_config(
        &dir,
        "unstable.json",
        r#"{"n": 2, "m": 2, "theta": [[0, 0.5], [-0.5, 0]], "R": [[1, 0], [0, 1]], "M": [[0, 0], [0, 0]]}"#,
    );
    assert_eq!(oqho(&["validate", "--config", &unstable]).status.code(), Some(1));
    assert_eq!(oqho(&["delta", "--r", "13"]).status.code(), Some(1));
}

#[test]
fn partial_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY_INLINE.replace("\"theta_list\": [0.1]", "\"theta_list\": [0.1, 0.7]");
    let cfg = write_config(&dir, "partial.json", &text);
    let out = oqho(&["analyze", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let report = json(&out);
    assert!(report["classical"]["rates"][1]["sde"]["error"].is_string());
    assert!(report["classical"]["rates"][0]["sde"].is_number());
}

#[test]
fn delta_csv() {
    let out = oqho(&["report", "--which", "delta", "--r", "4"]);
    assert_eq!(stdout(&out), "gamma_bits,count\n00,1\n01,2\n10,2\n11,1\n");
    assert_eq!(stdout(&oqho(&["delta", "--r", "3"])), "gamma_bits,count\n0,1\n1,1\n");
}

#[test]
fn bound_curve_starts_at_zero() {
    let out = oqho(&["report", "--which", "bound", "--fixture", "paper-example", "--eps-steps", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epsilon,bound_closed,bound_numeric,theta_star"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert!((first[0] / (4.0 * 69.6784) - 1.0).abs() < 1e-2);
    assert!(first[1].abs() < 1e-6);
    assert!(first[2] <= first[1]);
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn empty_grid_is_header_only() {
    let out = oqho(&["bound", "--fixture", "tiny", "--eps-steps", "0", "--method", "closed"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "epsilon,bound_closed,bound_numeric,theta_star\n");
}

#[test]
fn cumulant_json_and_csv() {
    let out = json(&oqho(&["cumulants", "--fixture", "paper-example", "--order", "2"]));
    assert_eq!(out["order"], 2);
    assert!((out["rate"].as_f64().unwrap() / 8.9399e3 - 1.0).abs() < 2e-3);
    let csv = stdout(&oqho(&["report", "--which", "cumulants", "--fixture", "tiny"]));
    assert!(csv.starts_with("order,rate\n2,"));
}

#[test]
fn simulate_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.json");
    let out = oqho(&[
        "simulate", "--fixture", "tiny", "--h", "0.1", "--steps", "20", "--paths", "2000",
        "--seed", "4", "--lag", "5", "--theta", "0.05", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for key in ["cov0", "covlag", "quadform_var", "rs_rate_mc", "targets", "stderr"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert_eq!(report["settings"]["lag_time"].as_f64(), Some(0.5));
    assert!(report["max_z"]["cov0"].as_f64().unwrap() < 5.0);
}

#[test]
fn validate_prints_certificates() {
    let out = json(&oqho(&["validate", "--fixture", "paper-example"]));
    assert_eq!(out["valid"], true);
    assert!(out["pr_residual"].as_f64().unwrap() < 1e-10);
}
