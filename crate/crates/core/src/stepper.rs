//! Time marching in time to maturity `τ = T − t`, from the payoff at `τ = 0`
//! to `τ = T`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{interpolate_at_feet, Grid, StepFeet};
use crate::model::{BoundarySpec, ModelParams, Payoff, Side};
use crate::operator::{CoefficientCache, ControlVector};
use crate::policy::{policy_iterate_cached, PolicyIterationReport, PolicyOutcome, PolicySettings};

/// Solved lattice `u_i^n`, `n` counting steps from the payoff level.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurface {
    side: Side,
    grid: Grid,
    first_level: usize,
    values: Vec<Vec<f64>>,
    policies: Vec<ControlVector>,
    reports: Vec<PolicyIterationReport>,
    far_field_bound: f64,
}

impl PriceSurface {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Level the march started from (0 unless restarted).
    pub fn first_level(&self) -> usize {
        self.first_level
    }

    pub fn last_level(&self) -> usize {
        self.first_level + self.values.len() - 1
    }

    /// Values at absolute level `n`.
    pub fn level(&self, n: usize) -> &[f64] {
        &self.values[n - self.first_level]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Policy used to reach level `n` (`n > first_level`).
    pub fn policy(&self, n: usize) -> &ControlVector {
        &self.policies[n - self.first_level - 1]
    }

    pub fn policies(&self) -> &[ControlVector] {
        &self.policies
    }

    pub fn reports(&self) -> &[PolicyIterationReport] {
        &self.reports
    }

    pub fn far_field_bound(&self) -> f64 {
        self.far_field_bound
    }

    /// Values at `τ = T`, i.e. calendar time `t = 0`.
    pub fn today(&self) -> &[f64] {
        self.values.last().expect("surface has at least one level")
    }

    /// Today's price at `spot`, linear between nodes.
    pub fn price_at(&self, spot: f64) -> f64 {
        self.grid.interpolate(self.today(), spot)
    }

    fn negated(mut self, side: Side) -> Self {
        for level in &mut self.values {
            for v in level.iter_mut() {
                *v = -*v;
            }
        }
        self.side = side;
        self
    }

    /// Restarts the march from level `n` of this surface. `boundary` is the
    /// claim's own boundary, as passed to [`solve`].
    pub fn restart_from(
        &self,
        n: usize,
        params: &ModelParams,
        boundary: &BoundarySpec,
        settings: &PolicySettings,
    ) -> Result<PriceSurface> {
        match self.side {
            Side::Ask => march(&self.grid, params, boundary, n, self.level(n), settings),
            Side::Bid => {
                let start: Vec<f64> = self.level(n).iter().map(|v| -v).collect();
                Ok(march(&self.grid, params, &boundary.negated(), n, &start, settings)?.negated(Side::Bid))
            }
        }
    }
}

/// One step `n → n+1` of the ask scheme.
pub fn step(
    values: &[f64],
    n: usize,
    grid: &Grid,
    params: &ModelParams,
    boundary: &BoundarySpec,
    settings: &PolicySettings,
) -> Result<PolicyOutcome> {
    let cache = CoefficientCache::new(grid, params);
    step_cached(values, n, grid, params, boundary, &cache, settings)
}

fn step_cached(
    values: &[f64],
    n: usize,
    grid: &Grid,
    params: &ModelParams,
    boundary: &BoundarySpec,
    cache: &CoefficientCache,
    settings: &PolicySettings,
) -> Result<PolicyOutcome> {
    let rate = params.rate();
    let feet = StepFeet::new(grid, rate, n);
    let g_next = boundary.far_field().value(n + 1, grid.tau(n + 1), grid.s_max(), rate)?;
    let rhs = interpolate_at_feet(values, &feet, g_next, rate)?;
    let out = policy_iterate_cached(values, &rhs, grid, params, cache, feet.dt(), settings)?;
    if !out.report.converged {
        return Err(Error::NotConverged {
            step: n + 1,
            iterations: out.report.iterations,
            residual: out.report.residual,
        });
    }
    Ok(out)
}

fn check_inputs(grid: &Grid, params: &ModelParams, boundary: &BoundarySpec, settings: &PolicySettings) -> Result<()> {
    settings.validate()?;
    if grid.s_max() != boundary.s_max() {
        return Err(Error::InvalidParameter {
            name: "s_max",
            value: boundary.s_max(),
            reason: "boundary cutoff differs from the grid's last node",
        });
    }
    let t = params.maturity();
    if libm::fabs(grid.maturity() - t) > 1e-12 * t {
        return Err(Error::InvalidParameter {
            name: "maturity",
            value: grid.maturity(),
            reason: "time steps do not sum to the maturity",
        });
    }
    if let Some(levels) = boundary.far_field().levels() {
        if levels != grid.n_steps() + 1 {
            return Err(Error::DimensionMismatch {
                what: "far-field table levels",
                expected: grid.n_steps() + 1,
                found: levels,
            });
        }
    }
    Ok(())
}

/// Ask-side march from `start` at level `start_level` to the last level.
pub fn march(
    grid: &Grid,
    params: &ModelParams,
    boundary: &BoundarySpec,
    start_level: usize,
    start: &[f64],
    settings: &PolicySettings,
) -> Result<PriceSurface> {
    check_inputs(grid, params, boundary, settings)?;
    let len = grid.nodes().len();
    if start.len() != len {
        return Err(Error::DimensionMismatch { what: "start level", expected: len, found: start.len() });
    }
    if start_level > grid.n_steps() {
        return Err(Error::DimensionMismatch {
            what: "start level index",
            expected: grid.n_steps(),
            found: start_level,
        });
    }
    let cache = CoefficientCache::new(grid, params);
    let steps = grid.n_steps() - start_level;
    let mut values = Vec::with_capacity(steps + 1);
    let mut policies = Vec::with_capacity(steps);
    let mut reports = Vec::with_capacity(steps);
    values.push(start.to_vec());
    for n in start_level..grid.n_steps() {
        let out = step_cached(&values[values.len() - 1], n, grid, params, boundary, &cache, settings)?;
        values.push(out.values);
        policies.push(out.control);
        reports.push(out.report);
    }
    Ok(PriceSurface {
        side: Side::Ask,
        grid: grid.clone(),
        first_level: start_level,
        values,
        policies,
        reports,
        far_field_bound: boundary.bound(),
    })
}

/// Full surface for `payoff.side()`. The bid is `−ask(−φ)` with the
/// far field negated alongside.
pub fn solve(
    payoff: &Payoff,
    params: &ModelParams,
    boundary: &BoundarySpec,
    grid: &Grid,
    settings: &PolicySettings,
) -> Result<PriceSurface> {
    match payoff.side() {
        Side::Ask => {
            let start: Vec<f64> = grid.nodes().iter().map(|&x| payoff.evaluate(x)).collect();
            march(grid, params, boundary, 0, &start, settings)
        }
        Side::Bid => {
            let neg = payoff.negate().with_side(Side::Ask);
            Ok(solve(&neg, params, &boundary.negated(), grid, settings)?.negated(Side::Bid))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `max(‖U^0‖∞, C_b)`.
    pub bound: f64,
    pub level_norms: Vec<f64>,
    /// `min_n (bound − ‖U^n‖∞)`.
    pub tightest_margin: f64,
    pub tightest_level: usize,
    pub passed: bool,
}

/// Checks `‖U^n‖∞ ≤ max(‖U^0‖∞, C_b)` at every level, allowing a few ulps
/// of the bound for rounding in the elimination.
pub fn stability_audit(surface: &PriceSurface) -> StabilityReport {
    let norms: Vec<f64> = surface
        .values
        .iter()
        .map(|l| l.iter().fold(0.0, |m: f64, v| m.max(libm::fabs(*v))))
        .collect();
    let bound = norms[0].max(surface.far_field_bound);
    let slack = 4.0 * f64::EPSILON * bound;
    let (tightest_level, tightest_margin) = norms
        .iter()
        .enumerate()
        .map(|(n, v)| (n + surface.first_level, bound - v))
        .fold((surface.first_level, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    StabilityReport { bound, level_norms: norms, tightest_margin, tightest_level, passed: tightest_margin >= -slack }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Spacing};
    use crate::model::{FarField, PayoffKind};
    use alloc::vec;

    fn setup(kind: PayoffKind, ff: FarField, rate: f64) -> (Payoff, ModelParams, BoundarySpec, Grid) {
        let p = ModelParams::new(rate, 0.15, 0.25, 0.5).unwrap();
        let payoff = Payoff::ask(kind).unwrap();
        let b = BoundarySpec::tight(200.0, ff).unwrap();
        let g = build_grid(&p, &b, 100, 50, Spacing::Uniform).unwrap();
        (payoff, p, b, g)
    }

    #[test]
    fn constants_are_stationary_without_rate() {
        let (payoff, p, b, g) = setup(PayoffKind::Constant(3.25), FarField::constant(3.25), 0.0);
        let s = solve(&payoff, &p, &b, &g, &PolicySettings::default()).unwrap();
        for level in s.levels() {
            assert!(level.iter().all(|&v| v == 3.25));
        }
    }

    // Hand recursion: with the far field following c/(1+rΔt)^n, each implicit
    // step divides the constant level by (1 + rΔt).
    #[test]
    fn constants_are_discounted_step_by_step() {
        let (r, c, m) = (0.1, 2.0, 50usize);
        let dt = 0.5 / m as f64;
        let table: Vec<f64> = (0..=m).map(|n| c / libm::pow(1.0 + r * dt, n as f64)).collect();
        let ff = FarField::Table { slope: vec![0.0; m + 1], intercept: table.clone() };
        let (payoff, p, b, g) = setup(PayoffKind::Constant(c), ff, r);
        let s = solve(&payoff, &p, &b, &g, &PolicySettings::default()).unwrap();
        for n in 0..=m {
            for &v in s.level(n) {
                assert!((v - table[n]).abs() < 1e-13, "level {n}: {v} vs {}", table[n]);
            }
        }
    }

    #[test]
    fn digital_origin_stays_zero_and_is_bounded() {
        let (payoff, p, b, g) =
            setup(PayoffKind::DigitalCall { strike: 100.0 }, FarField::constant(1.0), 0.1);
        let s = solve(&payoff, &p, &b, &g, &PolicySettings::default()).unwrap();
        assert!(s.levels().iter().all(|l| l[0] == 0.0));
        assert!(s.levels().iter().all(|l| l[100] == 1.0));
        let audit = stability_audit(&s);
        assert!(audit.passed);
        assert_eq!(audit.bound, 1.0);
    }

    #[test]
    fn bid_is_negated_ask_of_negated_claim() {
        let (payoff, p, b, g) =
            setup(PayoffKind::Butterfly { k1: 90.0, k2: 110.0 }, FarField::constant(0.0), 0.1);
        let bid = solve(&payoff.clone().with_side(Side::Bid), &p, &b, &g, &PolicySettings::default()).unwrap();
        let neg_ask = solve(&payoff.negate(), &p, &b.negated(), &g, &PolicySettings::default()).unwrap();
        for n in 0..=g.n_steps() {
            let expect: Vec<f64> = neg_ask.level(n).iter().map(|v| -v).collect();
            assert_eq!(bid.level(n), &expect[..]);
        }
        assert_eq!(bid.side(), Side::Bid);
    }

    #[test]
    fn zero_claim_gives_zero_surface() {
        let (payoff, p, b, g) = setup(PayoffKind::Constant(0.0), FarField::constant(0.0), 0.1);
        let s = solve(&payoff, &p, &b, &g, &PolicySettings::default()).unwrap();
        assert!(s.levels().iter().flatten().all(|&v| v == 0.0));
        let audit = stability_audit(&s);
        assert!(audit.passed && audit.bound == 0.0);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let (payoff, p, _, g) = setup(PayoffKind::Constant(1.0), FarField::constant(1.0), 0.1);
        let other = BoundarySpec::tight(150.0, FarField::constant(1.0)).unwrap();
        assert!(solve(&payoff, &p, &other, &g, &PolicySettings::default()).is_err());
        let short = BoundarySpec::tight(200.0, FarField::Table { slope: vec![0.0; 3], intercept: vec![1.0; 3] }).unwrap();
        assert!(matches!(
            solve(&payoff, &p, &short, &g, &PolicySettings::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_convergence_is_reported_with_step() {
        let (payoff, p, b, g) =
            setup(PayoffKind::DigitalCall { strike: 100.0 }, FarField::constant(1.0), 0.1);
        let settings = PolicySettings { tolerance: 1e-300, scale: 1.0, max_iter: 1 };
        match solve(&payoff, &p, &b, &g, &settings) {
            Err(Error::NotConverged { step: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
