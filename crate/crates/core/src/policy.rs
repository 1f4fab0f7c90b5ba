//! Per-step nonlinear solve by policy iteration.
//!
//! Each implicit step has to satisfy
//! `[I − Δt A(σ̂)] U = Ū` with `σ̂_i = argsup_{σ ∈ {σ̲, σ̄}} (A(σ) U)_i`.
//! Starting from the previous level, the iteration alternates a policy
//! update from the sign of the discrete curvature with a tridiagonal solve.
//! From the second solve on the iterates are componentwise nondecreasing.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::operator::{CoefficientCache, Control, ControlVector, DiscreteOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySettings {
    pub tolerance: f64,
    /// Floor of the denominator in the relative update test, in price units.
    pub scale: f64,
    pub max_iter: usize,
}

impl Default for PolicySettings {
    fn default() -> Self {
        Self { tolerance: 1e-6, scale: 1.0, max_iter: 100 }
    }
}

impl PolicySettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                value: self.tolerance,
                reason: "must be finite and positive",
            });
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParameter { name: "scale", value: self.scale, reason: "must be finite and positive" });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter { name: "max_iter", value: 0.0, reason: "must be at least 1" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyIterationReport {
    /// Number of linear solves.
    pub iterations: usize,
    /// `max_i |ũ^{k+1} − ũ^k| / max(scale, |ũ^{k+1}|)` of the last update.
    pub residual: f64,
    /// `min_i (ũ^{k+1} − ũ^k)` for every solve after the first.
    pub increments: Vec<f64>,
    pub converged: bool,
}

impl PolicyIterationReport {
    /// Smallest entry of the monotonicity trace, `+∞` when there is none.
    pub fn min_increment(&self) -> f64 {
        self.increments.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Result of one per-step solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome {
    pub values: Vec<f64>,
    pub control: ControlVector,
    pub report: PolicyIterationReport,
}

/// Divided second difference at interior node `i`.
pub fn curvature(u: &[f64], x: &[f64], i: usize) -> f64 {
    let right = (u[i + 1] - u[i]) / (x[i + 1] - x[i]);
    let left = (u[i] - u[i - 1]) / (x[i] - x[i - 1]);
    (right - left) / (x[i + 1] - x[i - 1])
}

/// Rounding noise of `curvature` at node `i`, relative to the local values.
fn curvature_noise(u: &[f64], x: &[f64], i: usize) -> f64 {
    let h = (x[i] - x[i - 1]).min(x[i + 1] - x[i]);
    let mag = libm::fabs(u[i - 1]) + libm::fabs(u[i]) + libm::fabs(u[i + 1]);
    16.0 * f64::EPSILON * mag / (h * (x[i + 1] - x[i - 1]))
}

/// `σ̄` where the divided second difference is `≥ 0`, `σ̲` elsewhere.
///
/// Differences below rounding noise count as zero, so affine stretches keep
/// `σ̄`. The noise floor scales with `u`, which keeps the choice invariant
/// under positive scaling.
pub fn select_policy(u: &[f64], grid: &Grid) -> ControlVector {
    let x = grid.nodes();
    let n = x.len() - 1;
    ControlVector(
        (1..n)
            .map(|i| {
                if curvature(u, x, i) >= -curvature_noise(u, x, i) {
                    Control::High
                } else {
                    Control::Low
                }
            })
            .collect(),
    )
}

/// Solves `[I − Δt A] v = rhs` by elimination without pivoting.
///
/// Rows 0 and N of `A` are zero, so `v_0 = rhs_0` and `v_N = rhs_N`.
pub fn solve_tridiagonal(op: &DiscreteOperator, dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let len = op.dim();
    if rhs.len() != len {
        return Err(Error::DimensionMismatch { what: "right-hand side", expected: len, found: rhs.len() });
    }
    if let Some(i) = rhs.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "right-hand side", index: i });
    }
    let (alpha, beta, diag) = (op.alpha(), op.beta(), op.diag());
    let mut c = Vec::with_capacity(len);
    let mut d = Vec::with_capacity(len);
    for i in 0..len {
        let lower = -dt * alpha[i];
        let main = 1.0 - dt * diag[i];
        let upper = -dt * beta[i];
        if !(lower.is_finite() && main.is_finite() && upper.is_finite()) {
            return Err(Error::NonFinite { what: "operator band", index: i });
        }
        let (c_prev, d_prev) = if i == 0 { (0.0, 0.0) } else { (c[i - 1], d[i - 1]) };
        let pivot = main - lower * c_prev;
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::ZeroPivot { row: i });
        }
        c.push(upper / pivot);
        d.push((rhs[i] - lower * d_prev) / pivot);
    }
    let mut v = d;
    for i in (0..len - 1).rev() {
        v[i] -= c[i] * v[i + 1];
    }
    Ok(v)
}

/// Solves `[I − Δt A] v = rhs` in correction form `v = rhs + δ`, with
/// `[I − Δt A] δ = Δt A rhs` and `A rhs` taken as differences. Levels on
/// which `A` vanishes come back unchanged to the bit.
pub fn solve_implicit_step(op: &DiscreteOperator, dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let len = op.dim();
    if rhs.len() != len {
        return Err(Error::DimensionMismatch { what: "right-hand side", expected: len, found: rhs.len() });
    }
    let (alpha, beta, rate) = (op.alpha(), op.beta(), op.rate());
    let mut defect = vec![0.0; len];
    for i in 1..len - 1 {
        let u = rhs[i];
        defect[i] = dt * (alpha[i] * (rhs[i - 1] - u) + beta[i] * (rhs[i + 1] - u) - rate * u);
    }
    let delta = solve_tridiagonal(op, dt, &defect)?;
    Ok(rhs.iter().zip(&delta).map(|(u, d)| u + d).collect())
}

/// `max_i |([I − Δt A] v − rhs)_i|`.
pub fn tridiagonal_residual(op: &DiscreteOperator, dt: f64, v: &[f64], rhs: &[f64]) -> Result<f64> {
    let av = op.apply(v)?;
    Ok(v.iter()
        .zip(&av)
        .zip(rhs)
        .map(|((vi, ai), bi)| libm::fabs(vi - dt * ai - bi))
        .fold(0.0, f64::max))
}

/// Policy iteration for one implicit step, starting from `u_init`.
///
/// Non-convergence is reported through `report.converged`, not as an error.
pub fn policy_iterate(
    u_init: &[f64],
    rhs_bar: &[f64],
    grid: &Grid,
    params: &ModelParams,
    dt: f64,
    settings: &PolicySettings,
) -> Result<PolicyOutcome> {
    let cache = CoefficientCache::new(grid, params);
    policy_iterate_cached(u_init, rhs_bar, grid, params, &cache, dt, settings)
}

pub(crate) fn policy_iterate_cached(
    u_init: &[f64],
    rhs_bar: &[f64],
    grid: &Grid,
    params: &ModelParams,
    cache: &CoefficientCache,
    dt: f64,
    settings: &PolicySettings,
) -> Result<PolicyOutcome> {
    settings.validate()?;
    let len = grid.nodes().len();
    if u_init.len() != len {
        return Err(Error::DimensionMismatch { what: "initial iterate", expected: len, found: u_init.len() });
    }
    let mut u = u_init.to_vec();
    let mut previous: Option<ControlVector> = None;
    let mut increments = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut control = select_policy(&u, grid);
    for k in 0..settings.max_iter {
        if k > 0 {
            control = select_policy(&u, grid);
        }
        if let Some(prev) = &previous {
            // Same coefficients and right-hand side: the next iterate is `u` itself.
            if same_sigmas(prev, &control, params) {
                return Ok(PolicyOutcome {
                    values: u,
                    control,
                    report: PolicyIterationReport { iterations, residual: 0.0, increments, converged: true },
                });
            }
        }
        let op = cache.assemble(&control)?;
        let next = solve_implicit_step(&op, dt, rhs_bar)?;
        residual = next
            .iter()
            .zip(&u)
            .map(|(a, b)| libm::fabs(a - b) / settings.scale.max(libm::fabs(*a)))
            .fold(0.0, f64::max);
        if k > 0 {
            increments.push(next.iter().zip(&u).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min));
        }
        u = next;
        iterations = k + 1;
        if residual < settings.tolerance {
            return Ok(PolicyOutcome {
                values: u,
                control,
                report: PolicyIterationReport { iterations, residual, increments, converged: true },
            });
        }
        previous = Some(control.clone());
    }
    Ok(PolicyOutcome {
        values: u,
        control,
        report: PolicyIterationReport { iterations, residual, increments, converged: false },
    })
}

fn same_sigmas(a: &ControlVector, b: &ControlVector, params: &ModelParams) -> bool {
    a.0.iter().zip(&b.0).all(|(x, y)| x == y || x.sigma(params) == y.sigma(params))
}
