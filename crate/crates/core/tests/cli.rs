use std::fs;
use std::path::Path;
use std::process::Command;

use eqalloc::cli::run_cli;
use eqalloc::io::{aggregate_rows, read_result_csv, write_result_csv};
use eqalloc::scenarios::presets::nine_country;

const MALAWI: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/malawi.json");
const NINE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/nine_country.json");

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["eqalloc"];
    full.extend_from_slice(args);
    let code = run_cli(full, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn dir_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_shipped_configs() {
    for path in [MALAWI, NINE] {
        let (code, out, err) = run(&["validate", "--config", path]);
        assert_eq!(code, 0, "{err}");
        assert!(out.starts_with("ok:"));
    }
    let (code, out, _) = run(&["validate", "--preset", "malawi-pareto"]);
    assert_eq!(code, 0);
    assert!(out.contains("1 realizations"));
}

#[test]
fn invalid_configs_fail_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["validate", "--config", NINE, "--set", "cost.omega_u=[1,2]"]);
    assert_eq!(code, 1);
    assert!(err.contains("omega_u"), "{err}");
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\n \"schema_version\": 1,\n \"name\": }").unwrap();
    let (code, _, err) = run(&[
        "simulate",
        "--config",
        dir_arg(&bad),
        "--output-dir",
        dir_arg(tmp.path()),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");
    assert!(!tmp.path().join("results.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&[]).0, 2);
    assert_eq!(run(&["simulate"]).0, 2);
    assert_eq!(
        run(&["validate", "--config", NINE, "--preset", "malawi"]).0,
        2
    );
}

#[test]
fn simulate_is_byte_identical_across_invocations() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let (code, _, err) = run(&[
            "simulate",
            "--config",
            NINE,
            "--set",
            "n_realizations=2",
            "--seed",
            "99",
            "--output-dir",
            dir_arg(d),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    for f in ["results.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 99);
    assert_eq!(summary["n_realizations"], 2);
}

#[test]
fn output_dir_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_eqalloc"))
        .args(["sweep-rho", "--config", NINE, "--rho", "0,0.3"])
        .env("EQALLOC_OUTPUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("rho_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(tmp.path().join("rho_sweep.json").exists());
}

#[test]
fn binary_reports_failures_with_nonzero_status() {
    let out = Command::new(env!("CARGO_BIN_EXE_eqalloc"))
        .args(["validate", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn learn_recovers_a_known_gain() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("h.csv");
    fs::write(
        &csv,
        "community,period,u_1,y_1\n0,1,1,2\n0,2,2,4\n0,3,3,6\n",
    )
    .unwrap();
    let (code, _, err) = run(&[
        "learn",
        "--input",
        dir_arg(&csv),
        "--output-dir",
        dir_arg(tmp.path()),
    ]);
    assert_eq!(code, 0, "{err}");
    let est: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("estimates.json")).unwrap()).unwrap();
    let g = est[0]["g_hat"][0][0].as_f64().unwrap();
    assert!((g - 2.0).abs() < 1e-12);
}

#[test]
fn learn_rejects_duplicate_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("h.csv");
    fs::write(&csv, "community,period,u_1,y_1\n0,1,1,2\n0,1,2,4\n").unwrap();
    let (code, _, err) = run(&[
        "learn",
        "--input",
        dir_arg(&csv),
        "--output-dir",
        dir_arg(tmp.path()),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("row 3"), "{err}");
}

#[test]
fn project_prints_the_projection() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = tmp.path().join("p.json");
    fs::write(
        &doc,
        r#"{"allocation": [[5], [-1], [2]], "budget": {"kind": "exact", "s_max": [3]}}"#,
    )
    .unwrap();
    let (code, out, err) = run(&["project", "--input", dir_arg(&doc)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.trim(), "[[3.0],[0.0],[0.0]]");
}

#[test]
fn pareto_sweep_writes_quadrants() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&[
        "sweep-pareto",
        "--preset",
        "malawi-pareto",
        "--rho",
        "0,1",
        "--sigma",
        "0",
        "--output-dir",
        dir_arg(tmp.path()),
    ]);
    assert_eq!(code, 0, "{err}");
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("pareto.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 2);
    let counts = summary["quadrant_counts"].as_object().unwrap();
    assert_eq!(counts.values().map(|v| v.as_u64().unwrap()).sum::<u64>(), 2);
}

#[test]
fn result_csv_round_trips_to_identical_aggregates() {
    let cfg = nine_country()
        .unwrap()
        .with_overrides(&[
            "n_realizations=4".into(),
            "estimate_error=0.1".into(),
            "track_optimum=true".into(),
        ])
        .unwrap();
    let result = cfg.build().unwrap().run().unwrap();
    let mut buf = Vec::new();
    write_result_csv(&result, &mut buf).unwrap();
    let rows = read_result_csv(buf.as_slice()).unwrap();
    assert_eq!(aggregate_rows(&rows).unwrap(), result.aggregates);
}
