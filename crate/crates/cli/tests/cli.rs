use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(sub: &str, config: &Value, dir: &Path) -> Output {
    let path = dir.join(format!("{sub}_config.json"));
    std::fs::write(&path, serde_json::to_string(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_levy-liouville"))
        .arg(sub)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap()).unwrap()
}

fn stable(alpha: f64) -> Value {
    json!({ "family": "isotropic_stable", "dimension": 1, "params": { "alpha": alpha } })
}

fn classify_config(function: Value) -> Value {
    json!({ "symbol": stable(1.9), "function": function, "beta": 1.5 })
}

fn hoelder_config(probes: Value) -> Value {
    json!({
        "symbol": stable(1.5),
        "grid": { "d": 1, "N": 4096, "h": 0.02 },
        "t": 1.0,
        "function": { "kind": "sin", "frequency": [1.0] },
        "beta": 0.5,
        "probes": probes,
    })
}

#[test]
fn classify_exit_codes_and_verdict_schema() {
    let dir = TempDir::new().unwrap();
    let linear = classify_config(json!({ "kind": "polynomial", "terms": [{ "coefficient": 1.0, "powers": [1] }] }));
    let out = run("classify", &linear, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "classify");
    assert_eq!(r["command"], "classify");
    assert_eq!(r["verdicts"]["classification"], "POLYNOMIAL");
    assert_eq!(r["results"]["degree"], 1);
    for key in ["config_echo", "residuals", "verdicts", "tolerances", "results", "artifacts", "provenance"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }

    let dir = TempDir::new().unwrap();
    let out = run("classify", &classify_config(json!({ "kind": "sin", "frequency": [1.0] })), dir.path());
    assert_eq!(out.status.code(), Some(2));
    let kind = report(dir.path(), "classify")["verdicts"]["classification"].clone();
    assert!(
        ["POLYNOMIAL", "CONSTANT", "NOT_HARMONIC", "INCONCLUSIVE"].contains(&kind.as_str().unwrap()),
        "{kind}"
    );
    assert_eq!(kind, "NOT_HARMONIC");
}

#[test]
fn errors_exit_one_with_json_diagnostic() {
    let dir = TempDir::new().unwrap();
    let mut cfg = classify_config(json!({ "kind": "sin", "frequency": [1.0] }));
    cfg["unexpected_key"] = json!(3);
    let out = run("classify", &cfg, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"], "config");
    assert!(diag["message"].as_str().unwrap().contains("unexpected_key"));

    let bad_alpha = json!({ "symbol": stable(2.5), "grid": { "d": 1, "N": 64, "h": 0.1 }, "t": 1.0 });
    let out = run("density", &bad_alpha, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"], "invalid_parameter");

    let mut mismatch = classify_config(json!({ "kind": "sin", "frequency": [1.0] }));
    mismatch["command"] = json!("density");
    assert_eq!(run("classify", &mismatch, dir.path()).status.code(), Some(1));
}

#[test]
fn reports_are_deterministic_apart_from_timestamp() {
    let cfg = json!({
        "symbol": stable(1.5),
        "grid": { "d": 1, "N": 1024, "h": 0.05 },
        "t": 0.5,
        "function": { "kind": "gaussian", "center": [0.0], "sigma": 1.0 },
        "points": [[0.0], [0.5]],
        "samples": 20000,
        "seed": 11,
    });
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        let code = run("simulate", &cfg, dir.path()).status.code();
        assert!(matches!(code, Some(0) | Some(2)), "{code:?}");
    }
    let mut ra = report(a.path(), "simulate");
    let mut rb = report(b.path(), "simulate");
    ra["provenance"]["generated_at"] = Value::Null;
    rb["provenance"]["generated_at"] = Value::Null;
    assert_eq!(ra, rb);
    assert_eq!(ra["provenance"]["seed"], 11);
}

#[test]
fn config_echo_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = hoelder_config(json!({ "radii": [1.0, 2.0], "h_exponents": [2, 3, 4], "directions": 2, "seed": 5 }));
    run("hoelder", &cfg, dir.path());
    let echo = report(dir.path(), "hoelder")["config_echo"].clone();
    // the echo is itself a valid config and reproduces the same run
    let again = TempDir::new().unwrap();
    let out = run("hoelder", &echo, again.path());
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    assert_eq!(report(again.path(), "hoelder")["config_echo"], echo);
    assert_eq!(
        report(again.path(), "hoelder")["results"],
        report(dir.path(), "hoelder")["results"]
    );
}

#[test]
fn hoelder_csv_has_one_row_per_probe() {
    let dir = TempDir::new().unwrap();
    let cfg = hoelder_config(json!({ "radii": [1.0, 2.0], "h_exponents": [2, 3, 4], "directions": 2, "seed": 5 }));
    run("hoelder", &cfg, dir.path());
    let rows = report(dir.path(), "hoelder")["results"]["rows"].as_array().unwrap().len();
    assert_eq!(rows, 2 * 3 * 2);
    let csv = std::fs::read_to_string(dir.path().join("hoelder_probes.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "r,h,lhs,bound,ratio");
    assert_eq!(lines.count(), rows);
}

#[test]
fn empty_probe_list_gives_empty_arrays() {
    let dir = TempDir::new().unwrap();
    let cfg = hoelder_config(json!({ "radii": [], "h_exponents": [2, 3], "directions": 4, "seed": 1 }));
    let out = run("hoelder", &cfg, dir.path());
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "hoelder");
    assert_eq!(r["results"]["rows"], json!([]));
    let csv = std::fs::read_to_string(dir.path().join("hoelder_probes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn density_reports_gaussian_peak() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "symbol": { "family": "brownian", "dimension": 1 },
        "grid": { "d": 1, "N": 4096, "h": 0.01 },
        "t": 1.0,
    });
    let out = run("density", &cfg, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "density");
    let p0 = r["results"]["p_at_origin"].as_f64().unwrap();
    // ψ = ½ξ² gives the standard normal at t = 1
    assert!((p0 - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-9, "{p0}");
    assert!((r["results"]["mass"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(r["artifacts"], json!(["density_density.csv"]));
    let csv = std::fs::read_to_string(dir.path().join("density_density.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4097);
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = json!({
        "symbol": stable(1.2),
        "grid": { "d": 1, "N": 2048, "h": 0.05 },
        "t": 1.0,
    });
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, cfg.to_string()).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_levy-liouville"))
            .args(["density", "--config"])
            .arg(&path)
            .arg("--out")
            .arg(dir.path())
            .env("LEVY_LIOUVILLE_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        reports.push(report(dir.path(), "density")["results"].clone());
    }
    assert_eq!(reports[0], reports[1]);
}
