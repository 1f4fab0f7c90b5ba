//! Invariant checks over solved surfaces, shared by `validate`, `price --check`
//! and the acceptance suite.

use barenblatt_core::{assemble, stability_audit, ModelParams, PriceSurface, Side, StabilityReport};

use crate::shape::{payoff_intervals, shape_defect, Shape, ShapeInterval};
use barenblatt_core::Payoff;

#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixAudit {
    pub steps: usize,
    pub failed_steps: Vec<usize>,
    pub min_margin: f64,
}

impl MMatrixAudit {
    pub fn passed(&self) -> bool {
        self.failed_steps.is_empty()
    }
}

/// Re-assembles `A(σ^n)` with each step's final policy and checks
/// `I − Δt A` row by row.
pub fn m_matrix_audit(surface: &PriceSurface, params: &ModelParams) -> MMatrixAudit {
    let grid = surface.grid();
    let mut failed_steps = Vec::new();
    let mut min_margin = f64::INFINITY;
    for (k, policy) in surface.policies().iter().enumerate() {
        let step = surface.first_level() + k + 1;
        let dt = grid.steps()[step - 1];
        match assemble(grid, params, policy) {
            Ok(op) => {
                let report = op.m_matrix_check(dt);
                min_margin = min_margin.min(report.min_dominance_margin);
                if !report.passed() {
                    failed_steps.push(step);
                }
            }
            Err(_) => failed_steps.push(step),
        }
    }
    MMatrixAudit { steps: surface.policies().len(), failed_steps, min_margin }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationAudit {
    pub steps: usize,
    pub max_iterations: usize,
    pub total_iterations: usize,
    /// Most negative `ũ^{k+1} − ũ^k` for `k ≥ 1`, over all steps.
    pub min_increment: f64,
    pub all_converged: bool,
}

impl IterationAudit {
    pub fn nondecreasing(&self, scale: f64) -> bool {
        self.min_increment >= -1e-12 * scale
    }
}

/// Monotonicity and convergence of the policy iterates, read from the
/// reports of the ask-side march (the bid surface stores the march of the
/// negated claim, where the same statement applies).
pub fn iteration_audit(surface: &PriceSurface) -> IterationAudit {
    let reports = surface.reports();
    IterationAudit {
        steps: reports.len(),
        max_iterations: reports.iter().map(|r| r.iterations).max().unwrap_or(0),
        total_iterations: reports.iter().map(|r| r.iterations).sum(),
        min_increment: reports.iter().map(|r| r.min_increment()).fold(f64::INFINITY, f64::min),
        all_converged: reports.iter().all(|r| r.converged),
    }
}

/// `max (lower − upper)` over every node and level; `≤ 0` means ordered.
pub fn ordering_violation(upper: &PriceSurface, lower: &PriceSurface) -> f64 {
    upper
        .levels()
        .iter()
        .zip(lower.levels())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| y - x))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn stability(surface: &PriceSurface) -> StabilityReport {
    stability_audit(surface)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCheck {
    pub side: Side,
    pub interval: ShapeInterval,
    /// Worst defect over levels `n ≥ 1`, in price units.
    pub defect: f64,
    pub worst_level: usize,
}

/// Shape intervals each side is expected to keep: monotone stretches on
/// both sides, convex stretches on the ask, concave stretches on the bid.
pub fn shape_checks(payoff: &Payoff, surface: &PriceSurface) -> Vec<ShapeCheck> {
    let grid = surface.grid();
    let x = grid.nodes();
    let keep = |s: Shape| match surface.side() {
        Side::Ask => s != Shape::Concave,
        Side::Bid => s != Shape::Convex,
    };
    payoff_intervals(payoff, grid.s_max())
        .into_iter()
        .filter(|iv| keep(iv.shape))
        .map(|interval| {
            let (mut defect, mut worst_level) = (0.0f64, surface.first_level());
            for n in surface.first_level() + 1..=surface.last_level() {
                let d = shape_defect(&interval, x, surface.level(n));
                if d > defect {
                    defect = d;
                    worst_level = n;
                }
            }
            ShapeCheck { side: surface.side(), interval, defect, worst_level }
        })
        .collect()
}
