use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use barenblatt_cli::commands::{convergence_study, validate};
use barenblatt_cli::report::{config_from_sidecar, CSV_HEADER};
use barenblatt_cli::RunConfig;
use barenblatt_core::Side;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn barenblatt(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_barenblatt"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_DIGITAL: &str = r#"{
    "model": { "rate": 0.1, "sigma_lo": 0.15, "sigma_hi": 0.25, "maturity": 0.5 },
    "payoff": { "kind": "digital_call", "strike": 100 },
    "boundary": { "s_max": 200, "far_field": { "type": "affine", "fixed": 1 } },
    "grid": { "n_space": 50, "n_time": 40 },
    "output": { "spot": 100 }
}"#;

#[test]
fn price_writes_both_sides_with_ordered_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("digital.cfg");
    let out = barenblatt(&["price", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let read = |side: &str| -> Vec<Vec<String>> {
        let text = std::fs::read_to_string(tmp.path().join(format!("digital_{side}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
    };
    let (ask, bid) = (read("ask"), read("bid"));
    assert_eq!(ask.len(), 201 * 201);
    for (a, b) in ask.iter().zip(&bid) {
        assert_eq!(a[..2], b[..2]);
        assert!(a[2].parse::<f64>().unwrap() >= b[2].parse::<f64>().unwrap());
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("ask price at S=100"), "{stdout}");
}

#[test]
fn output_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "d.cfg", SMALL_DIGITAL);
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let out = barenblatt(&["price", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()], &[]);
        assert!(out.status.success());
        bytes.push((std::fs::read(dir.join("d_ask.csv")).unwrap(), std::fs::read(dir.join("d_bid.csv")).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn sidecar_round_trips_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "d.cfg", SMALL_DIGITAL);
    let out = barenblatt(
        &["price", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--side", "ask"],
        &[],
    );
    assert!(out.status.success());
    assert!(!tmp.path().join("d_bid.csv").exists());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("d_ask.json")).unwrap()).unwrap();
    let back = config_from_sidecar(&meta).unwrap();
    let original = RunConfig::load(&cfg, std::iter::empty()).unwrap();
    assert_eq!(back, original);
    assert_eq!(meta["steps"].as_array().unwrap().len(), 40);
    assert_eq!(meta["tau"].as_array().unwrap().len(), 41);
    assert!(meta["steps"][0]["iterations"].as_u64().unwrap() >= 1);
}

#[test]
fn zero_claim_gives_zero_surfaces() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"{
        "model": { "rate": 0.1, "sigma_lo": 0.15, "sigma_hi": 0.25, "maturity": 0.5 },
        "payoff": { "kind": "constant", "value": 0 },
        "boundary": { "s_max": 200 },
        "grid": { "n_space": 40, "n_time": 20 }
    }"#;
    let cfg = write_config(tmp.path(), "zero.cfg", body);
    let out = barenblatt(&["price", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for side in ["ask", "bid"] {
        let text = std::fs::read_to_string(tmp.path().join(format!("zero_{side}.csv"))).unwrap();
        for line in text.lines().skip(1) {
            let v: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert_eq!(v, 0.0);
        }
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();

    let missing = barenblatt(&["price", "--config", "/nonexistent/x.cfg"], &[]);
    assert_eq!(missing.status.code(), Some(4));

    let bad = write_config(tmp.path(), "bad.cfg", "{ not json");
    assert_eq!(barenblatt(&["price", "--config", bad.to_str().unwrap()], &[]).status.code(), Some(2));

    let cfg = write_config(tmp.path(), "d.cfg", SMALL_DIGITAL);
    let cfg = cfg.to_str().unwrap();
    let stuck = barenblatt(
        &["price", "--config", cfg, "--out", dir],
        &[("BARENBLATT__SOLVER__MAX_ITER", "1"), ("BARENBLATT__SOLVER__TOLERANCE", "1e-300")],
    );
    assert_eq!(stuck.status.code(), Some(3));

    // r·x·Δt > Δx near S_max
    let coarse = barenblatt(&["validate", "--config", cfg], &[("BARENBLATT__GRID__N_TIME", "1")]);
    assert_eq!(coarse.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&coarse.stderr);
    assert!(msg.contains("time step must not exceed"), "{msg}");

    let ok = barenblatt(&["validate", "--config", cfg], &[]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));

    assert_eq!(barenblatt(&["converge", "--config", cfg, "--levels", "2", "--out", dir], &[]).status.code(), Some(2));
}

#[test]
fn env_overrides_reach_the_solver() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "d.cfg", SMALL_DIGITAL);
    let out = barenblatt(
        &["price", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()],
        &[("BARENBLATT__GRID__N_SPACE", "100"), ("BARENBLATT__OUTPUT__SIDE", "\"bid\"")],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("d_bid.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 41 * 101);
    assert!(!tmp.path().join("d_ask.csv").exists());
}

#[test]
fn validate_passes_on_both_examples() {
    for name in ["digital.cfg", "butterfly.cfg"] {
        let config = RunConfig::load(&configs().join(name), std::iter::empty()).unwrap();
        let report = validate(&config).unwrap();
        assert!(report.hard_failures().is_empty(), "{name}\n{report}");
    }
}

fn call_config(body_payoff: &str, n: usize) -> RunConfig {
    RunConfig::parse(&format!(
        r#"{{
        "model": {{ "rate": 0.1, "sigma_lo": 0.15, "sigma_hi": 0.25, "maturity": 0.5 }},
        "payoff": {body_payoff},
        "boundary": {{ "s_max": 200 }},
        "grid": {{ "n_space": {n}, "n_time": {n} }}
    }}"#
    ))
    .unwrap()
}

#[test]
fn call_converges_at_first_order() {
    let config = call_config(r#"{ "kind": "vanilla_call", "strike": 100 }"#, 50);
    let table = convergence_study(&config, Side::Ask, 100.0, 4).unwrap();
    let order = table.finest_order().unwrap();
    assert!((0.7..=1.5).contains(&order), "{table}");
}

#[test]
fn scaling_leaves_observed_orders_unchanged() {
    let base = call_config(r#"{ "kind": "vanilla_call", "strike": 100 }"#, 50);
    let scaled = call_config(
        r#"{ "kind": "portfolio", "legs": [ { "weight": 3, "payoff": { "kind": "vanilla_call", "strike": 100 } } ] }"#,
        50,
    );
    let a = convergence_study(&base, Side::Bid, 100.0, 3).unwrap();
    let b = convergence_study(&scaled, Side::Bid, 100.0, 3).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        match (x.order, y.order) {
            (Some(p), Some(q)) => assert!((p - q).abs() < 1e-9, "{p} vs {q}"),
            (None, None) => {}
            _ => panic!("order missing"),
        }
    }
}

#[test]
fn collapsed_band_digital_errors_shrink() {
    let config = RunConfig::parse(
        r#"{
        "model": { "rate": 0.1, "sigma": 0.2, "maturity": 0.5 },
        "payoff": { "kind": "digital_call", "strike": 100 },
        "boundary": { "s_max": 200, "far_field": { "type": "affine", "fixed": 1 } },
        "grid": { "n_space": 50, "n_time": 50 }
    }"#,
    )
    .unwrap();
    let table = convergence_study(&config, Side::Ask, 100.0, 4).unwrap();
    assert!(table.rows.windows(2).all(|w| w[1].error < w[0].error), "{table}");
}
