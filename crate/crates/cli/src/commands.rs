use std::fmt;
use std::path::PathBuf;

use barenblatt_core::oracle::reference_price;
use barenblatt_core::{solve, ModelParams, PriceSurface, Side};
use serde_json::json;

use crate::audit::{iteration_audit, m_matrix_audit, ordering_violation, shape_checks, stability};
use crate::config::{Problem, RunConfig, SideSelection};
use crate::error::{CliError, CliResult};
use crate::report::{side_name, write_surface};
use crate::shape::grid_tolerance;

/// Command-line choices that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub side: Option<SideSelection>,
    pub spot: Option<f64>,
}

impl Overrides {
    fn sides(&self, config: &RunConfig) -> &'static [Side] {
        self.side.unwrap_or(config.output.side).sides()
    }

    fn spot(&self, config: &RunConfig) -> Option<f64> {
        self.spot.or(config.output.spot)
    }

    fn dir(&self, config: &RunConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| config.output.dir.clone())
    }
}

pub fn solve_side(problem: &Problem, side: Side) -> CliResult<PriceSurface> {
    let payoff = problem.payoff.clone().with_side(side);
    Ok(solve(&payoff, &problem.params, &problem.boundary, &problem.grid, &problem.settings)?)
}

pub fn cmd_price(config: &RunConfig, o: &Overrides, check: bool) -> CliResult<String> {
    let problem = config.problem()?;
    let spot = o.spot(config);
    let dir = o.dir(config);
    let mut out = String::new();
    let mut audit_failed = Vec::new();
    let mut surfaces = Vec::new();
    for &side in o.sides(config) {
        let surface = solve_side(&problem, side)?;
        let written = write_surface(&dir, config, &surface, &problem.params, spot)?;
        let name = side_name(side);
        out += &format!("{name}: {} {}\n", written.csv.display(), written.json.display());
        if let Some(s) = spot {
            let tau = problem.grid.maturity();
            out += &format!("{name} price at S={s} (t=0, tau={tau}): {}\n", surface.price_at(s));
        }
        if check {
            let audit = m_matrix_audit(&surface, &problem.params);
            out += &format!(
                "{name} M-matrix audit: {}/{} steps pass, min dominance margin {:e}\n",
                audit.steps - audit.failed_steps.len(),
                audit.steps,
                audit.min_margin
            );
            if !audit.passed() {
                audit_failed.push(format!("{name} steps {:?}", audit.failed_steps));
            }
        }
        surfaces.push(surface);
    }
    if let [ask, bid] = &surfaces[..] {
        out += &format!("min ask - bid over the surface: {:e}\n", -ordering_violation(ask, bid));
    }
    if !audit_failed.is_empty() {
        return Err(CliError::Validation(format!("M-matrix audit failed: {}", audit_failed.join("; "))));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: u32,
    pub n_space: usize,
    pub n_time: usize,
    pub dx: f64,
    pub dt: f64,
    pub value: f64,
    pub error: f64,
    /// `log2(e_{l−1} / e_l)`.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub side: Side,
    pub spot: f64,
    pub reference: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Order observed on the finest pair of levels.
    pub fn finest_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }

    /// Largest `error / (Δx + Δt)` over the levels.
    pub fn error_constant(&self) -> f64 {
        self.rows.iter().map(|r| r.error / (r.dx + r.dt)).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "side": side_name(self.side),
            "spot": self.spot,
            "reference": self.reference,
            "rows": self.rows.iter().map(|r| json!({
                "level": r.level, "n_space": r.n_space, "n_time": r.n_time,
                "dx": r.dx, "dt": r.dt, "value": r.value, "error": r.error, "order": r.order,
            })).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} at S={}: reference {}", side_name(self.side), self.spot, self.reference)?;
        writeln!(f, "{:>5} {:>7} {:>7} {:>10} {:>10} {:>18} {:>12} {:>7}", "level", "N", "M", "dx", "dt", "value", "error", "order")?;
        for r in &self.rows {
            let order = r.order.map_or("-".to_string(), |o| format!("{o:.3}"));
            writeln!(
                f,
                "{:>5} {:>7} {:>7} {:>10.4e} {:>10.4e} {:>18.12} {:>12.4e} {:>7}",
                r.level, r.n_space, r.n_time, r.dx, r.dt, r.value, r.error, order
            )?;
        }
        Ok(())
    }
}

/// Solves at `levels` dyadic refinements (both counts doubled per level),
/// concurrently, and compares each with the closed-form price at `spot`.
pub fn convergence_study(config: &RunConfig, side: Side, spot: f64, levels: u32) -> CliResult<ConvergenceTable> {
    if levels < 3 {
        return Err(CliError::Config(format!("need at least 3 refinement levels, got {levels}")));
    }
    let base = config.problem()?;
    let payoff = base.payoff.clone().with_side(side);
    let reference = reference_price(&payoff, &base.params, spot, base.params.maturity()).ok_or_else(|| {
        CliError::Config("no closed-form reference: payoff is neither convex nor concave and the band is open".into())
    })?;
    let results: Vec<CliResult<(Problem, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..levels)
            .map(|l| {
                scope.spawn(move || {
                    let problem = config.problem_refined(l)?;
                    let value = solve_side(&problem, side)?.price_at(spot);
                    Ok((problem, value))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("refinement thread panicked")).collect()
    });
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels as usize);
    for (l, result) in results.into_iter().enumerate() {
        let (problem, value) = result?;
        let error = (value - reference).abs();
        let order = rows.last().map(|prev| (prev.error / error).log2());
        rows.push(ConvergenceRow {
            level: l as u32,
            n_space: problem.grid.n_intervals(),
            n_time: problem.grid.n_steps(),
            dx: problem.grid.max_dx(),
            dt: problem.grid.max_dt(),
            value,
            error,
            order,
        });
    }
    Ok(ConvergenceTable { side, spot, reference, rows })
}

pub fn cmd_converge(config: &RunConfig, o: &Overrides, levels: u32) -> CliResult<String> {
    let spot = o.spot(config).ok_or_else(|| CliError::Config("converge needs a spot (--spot or output.spot)".into()))?;
    let mut out = String::new();
    let mut tables = Vec::new();
    for &side in o.sides(config) {
        let table = convergence_study(config, side, spot, levels)?;
        out += &table.to_string();
        tables.push(table.to_json());
    }
    let dir = o.dir(config);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let path = dir.join(format!("{}_converge.json", config.stem()));
    let body = serde_json::to_string_pretty(&json!({ "config": config.to_json(), "studies": tables })).expect("serializes");
    std::fs::write(&path, body + "\n").map_err(|e| CliError::io(&path, e))?;
    out += &format!("wrote {}\n", path.display());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Hard checks decide the exit status; the rest are reported only.
    pub hard: bool,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: impl Into<String>, hard: bool, passed: bool, detail: String) {
        self.checks.push(Check { name: name.into(), hard, passed, detail });
    }

    pub fn hard_failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.hard && !c.passed).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match (c.passed, c.hard) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "WARN",
            };
            writeln!(f, "{tag} {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

fn same_bits(a: &PriceSurface, b: &PriceSurface, negate: bool) -> bool {
    a.levels().iter().zip(b.levels()).all(|(x, y)| {
        x.iter().zip(y).all(|(p, q)| p.to_bits() == if negate { (-q).to_bits() } else { q.to_bits() })
    })
}

/// Runs the invariant battery on the configured problem.
pub fn validate(config: &RunConfig) -> CliResult<ValidationReport> {
    let problem = config.problem()?;
    let Problem { params, payoff, boundary, grid, settings } = &problem;
    let mut report = ValidationReport::default();
    report.push(
        "admissible time steps",
        true,
        true,
        format!("max dt {:e} within r x dt <= dx at every node", grid.max_dt()),
    );
    let q = grid.quasi_uniformity(0.5, 2.0);
    report.push(
        "quasi-uniformity",
        false,
        q.satisfied,
        format!("h = {:e}, cell/h in [{:.4}, {:.4}] against [{}, {}]", q.h, q.min_ratio, q.max_ratio, q.c1, q.c2),
    );

    let ask = solve_side(&problem, Side::Ask)?;
    let bid = solve_side(&problem, Side::Bid)?;
    for surface in [&ask, &bid] {
        let name = side_name(surface.side());
        let m = m_matrix_audit(surface, params);
        report.push(
            format!("{name} M-matrix"),
            true,
            m.passed(),
            format!("{} steps, failing {:?}, min dominance margin {:e}", m.steps, m.failed_steps, m.min_margin),
        );
        let s = stability(surface);
        report.push(
            format!("{name} stability"),
            true,
            s.passed,
            format!("bound {}, tightest margin {:e} at level {}", s.bound, s.tightest_margin, s.tightest_level),
        );
        let it = iteration_audit(surface);
        report.push(
            format!("{name} nondecreasing iterates"),
            true,
            it.all_converged && it.nondecreasing(settings.scale),
            format!(
                "min increment {:e}, max {} iterations per step, all converged: {}",
                it.min_increment, it.max_iterations, it.all_converged
            ),
        );
    }
    let gap = ordering_violation(&ask, &bid);
    report.push("bid <= ask", true, gap <= 1e-12, format!("max (bid - ask) = {gap:e}"));

    let neg_ask = solve(&payoff.negate(), params, &boundary.negated(), grid, settings)?;
    report.push("bid = -ask(-payoff)", false, same_bits(&bid, &neg_ask, true), "bitwise".into());

    let scaled = solve(&payoff.scaled(2.0)?, params, &boundary.scaled(2.0), grid, settings)?;
    let ratio_err = ask
        .levels()
        .iter()
        .zip(scaled.levels())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (2.0 * x - y).abs()))
        .fold(0.0, f64::max);
    let same_policy = ask.policies() == scaled.policies();
    report.push(
        "positive homogeneity (lambda = 2)",
        false,
        ratio_err <= 1e-12 * boundary.bound().max(1.0) && same_policy,
        format!("max |2 u - u_2| = {ratio_err:e}, identical policies: {same_policy}"),
    );

    let k = grid.n_steps() / 2;
    let tail = ask.restart_from(k, params, boundary, settings)?;
    let consistent = (k..=grid.n_steps()).all(|n| tail.level(n) == ask.level(n));
    report.push("time consistency", false, consistent, format!("restart from level {k}"));

    if !params.is_degenerate() {
        let (lo, hi) = (params.sigma_lo(), params.sigma_hi());
        let mut worst = f64::NEG_INFINITY;
        for j in 0..5 {
            let sigma = lo + (hi - lo) * j as f64 / 4.0;
            let fixed = ModelParams::fixed_volatility(params.rate(), sigma, params.maturity())?;
            let mid = solve(payoff, &fixed, boundary, grid, settings)?;
            worst = worst.max(ordering_violation(&ask, &mid)).max(ordering_violation(&mid, &bid));
        }
        report.push("bid <= fixed volatility <= ask", false, worst <= 1e-8, format!("max violation {worst:e}"));
    }

    let tol = grid_tolerance(grid.max_dx(), grid.max_dt());
    for surface in [&ask, &bid] {
        for c in shape_checks(payoff, surface) {
            report.push(
                format!(
                    "{} keeps {} on ({}, {})",
                    side_name(c.side),
                    c.interval.shape.name(),
                    c.interval.lo,
                    c.interval.hi
                ),
                false,
                c.defect <= tol,
                format!("defect {:e} (level {}), tolerance {tol:e}", c.defect, c.worst_level),
            );
        }
    }
    Ok(report)
}

/// Report text, plus an error naming the failed hard checks if any.
pub fn cmd_validate(config: &RunConfig) -> CliResult<(String, CliResult<()>)> {
    let report = validate(config)?;
    let failed: Vec<&str> = report.hard_failures().iter().map(|c| c.name.as_str()).collect();
    let status = if failed.is_empty() { Ok(()) } else { Err(CliError::Validation(failed.join(", "))) };
    Ok((report.to_string(), status))
}
