//! Surface export: long-form CSV plus a JSON sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use barenblatt_core::{stability_audit, ModelParams, PriceSurface, Side};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CSV_HEADER: &str = "tau,s,value,policy";

pub fn side_name(side: Side) -> &'static str {
    match side {
        Side::Ask => "ask",
        Side::Bid => "bid",
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    serde_json::to_string(&v).expect("finite value")
}

/// One row per (level, node). `policy` is the volatility in force on the
/// step that produced the level, empty on the payoff level and at the two
/// boundary nodes.
pub fn surface_csv(surface: &PriceSurface, params: &ModelParams) -> String {
    let grid = surface.grid();
    let x = grid.nodes();
    let n = x.len() - 1;
    let mut out = String::with_capacity(32 * x.len() * (surface.levels().len()));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for level in surface.first_level()..=surface.last_level() {
        let tau = grid.tau(level);
        let values = surface.level(level);
        let policy = (level > surface.first_level()).then(|| surface.policy(level));
        for i in 0..=n {
            let _ = write!(out, "{},{},{},", num(tau), num(x[i]), num(values[i]));
            if let Some(p) = policy {
                if i > 0 && i < n {
                    out.push_str(&num(p.at_node(i).sigma(params)));
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Run metadata: the config, grid facts and per-step iteration counts.
pub fn sidecar(config: &RunConfig, surface: &PriceSurface, spot: Option<f64>) -> Value {
    let grid = surface.grid();
    let q = grid.quasi_uniformity(0.5, 2.0);
    let maturity = grid.maturity();
    let stability = stability_audit(surface);
    let steps: Vec<Value> = surface
        .reports()
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let min_inc = r.min_increment();
            json!({
                "step": surface.first_level() + k + 1,
                "iterations": r.iterations,
                "residual": r.residual,
                "min_increment": min_inc.is_finite().then_some(min_inc),
                "converged": r.converged,
            })
        })
        .collect();
    json!({
        "side": side_name(surface.side()),
        "config": config.to_json(),
        "grid": {
            "n_space": grid.n_intervals(),
            "n_time": grid.n_steps(),
            "s_max": grid.s_max(),
            "maturity": maturity,
            "max_dx": grid.max_dx(),
            "max_dt": grid.max_dt(),
            "quasi_uniformity": {
                "c1": q.c1, "c2": q.c2, "h": q.h,
                "min_ratio": q.min_ratio, "max_ratio": q.max_ratio,
                "satisfied": q.satisfied,
            },
        },
        "tau": grid.taus(),
        "t": grid.taus().iter().map(|tau| maturity - tau).collect::<Vec<_>>(),
        "steps": steps,
        "total_iterations": surface.reports().iter().map(|r| r.iterations).sum::<usize>(),
        "stability": {
            "bound": stability.bound,
            "tightest_margin": stability.tightest_margin,
            "tightest_level": stability.tightest_level,
            "passed": stability.passed,
        },
        "spot": spot.map(|s| json!({ "s": s, "value": surface.price_at(s) })),
    })
}

pub struct Written {
    pub csv: PathBuf,
    pub json: PathBuf,
}

pub fn write_surface(
    dir: &Path,
    config: &RunConfig,
    surface: &PriceSurface,
    params: &ModelParams,
    spot: Option<f64>,
) -> CliResult<Written> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let stem = format!("{}_{}", config.stem(), side_name(surface.side()));
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    fs::write(&csv, surface_csv(surface, params)).map_err(|e| CliError::io(&csv, e))?;
    let meta = serde_json::to_string_pretty(&sidecar(config, surface, spot)).expect("sidecar serializes");
    fs::write(&json, meta + "\n").map_err(|e| CliError::io(&json, e))?;
    Ok(Written { csv, json })
}

/// Recovers the run configuration from a sidecar.
pub fn config_from_sidecar(meta: &Value) -> CliResult<RunConfig> {
    let config = meta.get("config").ok_or_else(|| CliError::Config("sidecar has no `config`".into()))?;
    serde_json::from_value(config.clone()).map_err(|e| CliError::Config(e.to_string()))
}
