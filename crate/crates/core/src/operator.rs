//! The discrete spatial operator
//!
//! ```text
//! (A u)_i = α_i u_{i−1} + β_i u_{i+1} − (α_i + β_i + r) u_i
//! α_i = σ_i² x_i² / ((x_i − x_{i−1})(x_{i+1} − x_{i−1}))
//! β_i = σ_i² x_i² / ((x_{i+1} − x_i)(x_{i+1} − x_{i−1}))
//! ```
//!
//! with zero rows at `i = 0` and `i = N`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::ModelParams;

/// One of the two band endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Control {
    Low,
    High,
}

impl Control {
    pub fn sigma(self, params: &ModelParams) -> f64 {
        match self {
            Control::Low => params.sigma_lo(),
            Control::High => params.sigma_hi(),
        }
    }
}

/// Volatility choice per interior node `1..N`; entry `0` belongs to node 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ControlVector(pub Vec<Control>);

impl ControlVector {
    pub fn uniform(n_interior: usize, c: Control) -> Self {
        Self(vec![c; n_interior])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Control at grid node `i` (`1 ≤ i ≤ N−1`).
    pub fn at_node(&self, i: usize) -> Control {
        self.0[i - 1]
    }

    pub fn is_all(&self, c: Control) -> bool {
        self.0.iter().all(|&x| x == c)
    }
}

/// Tridiagonal bands of `A(σ)`, stored per row `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    sub: Vec<f64>,
    sup: Vec<f64>,
    diag: Vec<f64>,
    rate: f64,
}

impl DiscreteOperator {
    /// Operator from raw interior coefficients; boundary rows are zeroed and
    /// the diagonal is `−(α + β + r)`. Mostly useful for tests and audits.
    pub fn from_coefficients(alpha: Vec<f64>, beta: Vec<f64>, rate: f64) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.len() < 3 {
            return Err(Error::DimensionMismatch { what: "operator bands", expected: alpha.len(), found: beta.len() });
        }
        let n = alpha.len() - 1;
        let mut sub = alpha;
        let mut sup = beta;
        sub[0] = 0.0;
        sup[0] = 0.0;
        sub[n] = 0.0;
        sup[n] = 0.0;
        let diag = (0..=n)
            .map(|i| if i == 0 || i == n { 0.0 } else { -(sub[i] + sup[i] + rate) })
            .collect();
        Ok(Self { sub, sup, diag, rate })
    }

    /// `α_i`, zero at the boundary rows.
    pub fn alpha(&self) -> &[f64] {
        &self.sub
    }

    /// `β_i`, zero at the boundary rows.
    pub fn beta(&self) -> &[f64] {
        &self.sup
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let len = self.dim();
        if u.len() != len {
            return Err(Error::DimensionMismatch { what: "operator argument", expected: len, found: u.len() });
        }
        let mut out = vec![0.0; len];
        for i in 1..len - 1 {
            out[i] = self.sub[i] * u[i - 1] + self.sup[i] * u[i + 1] + self.diag[i] * u[i];
        }
        Ok(out)
    }

    /// Checks that `I − Δt·A` is an M-matrix by its sign pattern and row
    /// dominance.
    pub fn m_matrix_check(&self, dt: f64) -> MMatrixReport {
        let n = self.dim() - 1;
        let mut violations = Vec::new();
        let mut min_margin = f64::INFINITY;
        for i in 0..=n {
            let d = 1.0 - dt * self.diag[i];
            let lower = if i > 0 { -dt * self.sub[i] } else { 0.0 };
            let upper = if i < n { -dt * self.sup[i] } else { 0.0 };
            if !(d > 0.0) {
                violations.push(MMatrixViolation { row: i, kind: ViolationKind::NonPositiveDiagonal, value: d });
            }
            if !(lower <= 0.0) {
                violations.push(MMatrixViolation { row: i, kind: ViolationKind::PositiveOffDiagonal, value: lower });
            }
            if !(upper <= 0.0) {
                violations.push(MMatrixViolation { row: i, kind: ViolationKind::PositiveOffDiagonal, value: upper });
            }
            let margin = d - libm::fabs(lower) - libm::fabs(upper);
            // every row carries the identity, so dominance must be strict
            if !(margin > 0.0) || !margin.is_finite() {
                violations.push(MMatrixViolation { row: i, kind: ViolationKind::NotDiagonallyDominant, value: margin });
            }
            min_margin = min_margin.min(margin);
        }
        MMatrixReport { dt, rows: n + 1, min_dominance_margin: min_margin, violations }
    }
}

pub fn m_matrix_check(op: &DiscreteOperator, dt: f64) -> MMatrixReport {
    op.m_matrix_check(dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NonPositiveDiagonal,
    PositiveOffDiagonal,
    NotDiagonallyDominant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MMatrixViolation {
    pub row: usize,
    pub kind: ViolationKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixReport {
    pub dt: f64,
    pub rows: usize,
    pub min_dominance_margin: f64,
    pub violations: Vec<MMatrixViolation>,
}

impl MMatrixReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for MMatrixReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "m_matrix status={} rows={} dt={} min_dominance_margin={:e} violations={}",
            if self.passed() { "pass" } else { "fail" },
            self.rows,
            self.dt,
            self.min_dominance_margin,
            self.violations.len()
        )?;
        for v in &self.violations {
            write!(f, "\n  row={} kind={:?} value={:e}", v.row, v.kind, v.value)?;
        }
        Ok(())
    }
}

/// Geometry part of the coefficients, `x_i² / (h⁻ (h⁻ + h⁺))` and
/// `x_i² / (h⁺ (h⁻ + h⁺))`; the coefficients are `σ²` times these.
fn geometry(grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let x = grid.nodes();
    let n = x.len() - 1;
    let mut ga = vec![0.0; n + 1];
    let mut gb = vec![0.0; n + 1];
    for i in 1..n {
        let hm = x[i] - x[i - 1];
        let hp = x[i + 1] - x[i];
        let span = x[i + 1] - x[i - 1];
        let x2 = x[i] * x[i];
        ga[i] = x2 / (hm * span);
        gb[i] = x2 / (hp * span);
    }
    (ga, gb)
}

pub fn assemble(grid: &Grid, params: &ModelParams, control: &ControlVector) -> Result<DiscreteOperator> {
    CoefficientCache::new(grid, params).assemble(control)
}

/// Coefficient tables for the all-low and all-high controls. Assembly picks
/// rows from them, so cached and direct assembly agree bit for bit.
#[derive(Debug, Clone)]
pub struct CoefficientCache {
    alpha_lo: Vec<f64>,
    beta_lo: Vec<f64>,
    alpha_hi: Vec<f64>,
    beta_hi: Vec<f64>,
    rate: f64,
}

impl CoefficientCache {
    pub fn new(grid: &Grid, params: &ModelParams) -> Self {
        let (ga, gb) = geometry(grid);
        let s_lo = params.sigma_lo() * params.sigma_lo();
        let s_hi = params.sigma_hi() * params.sigma_hi();
        Self {
            alpha_lo: ga.iter().map(|g| s_lo * g).collect(),
            beta_lo: gb.iter().map(|g| s_lo * g).collect(),
            alpha_hi: ga.iter().map(|g| s_hi * g).collect(),
            beta_hi: gb.iter().map(|g| s_hi * g).collect(),
            rate: params.rate(),
        }
    }

    pub fn assemble(&self, control: &ControlVector) -> Result<DiscreteOperator> {
        let len = self.alpha_lo.len();
        if control.len() != len - 2 {
            return Err(Error::DimensionMismatch { what: "control vector", expected: len - 2, found: control.len() });
        }
        let mut sub = vec![0.0; len];
        let mut sup = vec![0.0; len];
        let mut diag = vec![0.0; len];
        for (k, &c) in control.0.iter().enumerate() {
            let i = k + 1;
            let (a, b) = match c {
                Control::Low => (self.alpha_lo[i], self.beta_lo[i]),
                Control::High => (self.alpha_hi[i], self.beta_hi[i]),
            };
            sub[i] = a;
            sup[i] = b;
            diag[i] = -(a + b + self.rate);
        }
        Ok(DiscreteOperator { sub, sup, diag, rate: self.rate })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(nodes: Vec<f64>) -> Grid {
        Grid::from_partition(nodes, vec![0.0025], 0.0).unwrap()
    }

    #[test]
    fn uniform_coefficients() {
        let g = grid((0..=200).map(|i| i as f64).collect());
        let p = ModelParams::fixed_volatility(0.1, 0.25, 0.5).unwrap();
        let op = assemble(&g, &p, &ControlVector::uniform(199, Control::High)).unwrap();
        assert_eq!(op.alpha()[100], 312.5);
        assert_eq!(op.beta()[100], 312.5);
        assert_eq!(op.diag()[100], -(625.0 + 0.1));
        assert_eq!(op.alpha()[0], 0.0);
        assert_eq!(op.diag()[200], 0.0);
    }

    #[test]
    fn zero_volatility_leaves_only_discounting() {
        let g = grid((0..=10).map(|i| i as f64).collect());
        let p = ModelParams::fixed_volatility(0.05, 0.0, 1.0).unwrap();
        let op = assemble(&g, &p, &ControlVector::uniform(9, Control::Low)).unwrap();
        for i in 1..10 {
            assert_eq!((op.alpha()[i], op.beta()[i], op.diag()[i]), (0.0, 0.0, -0.05));
        }
    }

    #[test]
    fn non_uniform_stencil() {
        let g = grid(vec![0.0, 1.0, 2.0, 4.0]);
        let p = ModelParams::fixed_volatility(0.0, 1.0, 1.0).unwrap();
        let op = assemble(&g, &p, &ControlVector::uniform(2, Control::High)).unwrap();
        assert!((op.alpha()[2] - 4.0 / 3.0).abs() < 1e-15);
        assert!((op.beta()[2] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn apply_examples() {
        let g = grid((0..=4).map(|i| i as f64).collect());
        let p = ModelParams::fixed_volatility(0.07, 0.3, 1.0).unwrap();
        let op = assemble(&g, &p, &ControlVector::uniform(3, Control::High)).unwrap();
        let c = op.apply(&[2.0; 5]).unwrap();
        for i in 1..4 {
            assert!((c[i] + 0.07 * 2.0).abs() < 1e-14);
        }
        assert_eq!((c[0], c[4]), (0.0, 0.0));

        let p0 = ModelParams::fixed_volatility(0.0, 0.3, 1.0).unwrap();
        let op0 = assemble(&g, &p0, &ControlVector::uniform(3, Control::High)).unwrap();
        let affine: Vec<f64> = g.nodes().iter().map(|x| 3.0 * x - 1.0).collect();
        assert!(op0.apply(&affine).unwrap().iter().all(|v| v.abs() < 1e-13));
    }

    // Brute-force stencil evaluation of u = x² on a 5-node grid with σ = √2, r = 0:
    // ½σ²x²·u'' = 2x², which the three-point stencil reproduces exactly.
    #[test]
    fn apply_on_quadratic() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let g = grid(x.to_vec());
        let sigma = 2.0f64.sqrt();
        let p = ModelParams::fixed_volatility(0.0, sigma, 1.0).unwrap();
        let op = assemble(&g, &p, &ControlVector::uniform(3, Control::High)).unwrap();
        let u: Vec<f64> = x.iter().map(|v| v * v).collect();
        let au = op.apply(&u).unwrap();
        for i in 1..4 {
            let s2 = sigma * sigma;
            let a = s2 * x[i] * x[i] / ((x[i] - x[i - 1]) * (x[i + 1] - x[i - 1]));
            let b = s2 * x[i] * x[i] / ((x[i + 1] - x[i]) * (x[i + 1] - x[i - 1]));
            let brute = a * u[i - 1] + b * u[i + 1] - (a + b) * u[i];
            assert!((au[i] - brute).abs() < 1e-12);
            assert!((au[i] - 2.0 * x[i] * x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn m_matrix_examples() {
        let g = grid((0..=20).map(|i| i as f64 * 5.0).collect());
        let p = ModelParams::new(0.1, 0.15, 0.25, 0.5).unwrap();
        let op = assemble(&g, &p, &ControlVector::uniform(19, Control::High)).unwrap();
        let rep = op.m_matrix_check(0.0025);
        assert!(rep.passed(), "{rep}");

        let mut alpha = op.alpha().to_vec();
        alpha[7] = -1.0;
        let bad = DiscreteOperator::from_coefficients(alpha, op.beta().to_vec(), 0.1).unwrap();
        let rep = bad.m_matrix_check(0.0025);
        assert!(!rep.passed());
        assert!(rep.violations.iter().any(|v| v.row == 7 && v.kind == ViolationKind::PositiveOffDiagonal));

        let p0 = ModelParams::fixed_volatility(0.0, 0.2, 0.5).unwrap();
        let op0 = assemble(&g, &p0, &ControlVector::uniform(19, Control::Low)).unwrap();
        assert!(op0.m_matrix_check(0.0025).passed());
    }

    #[test]
    fn cache_matches_direct_formula() {
        let g = grid(vec![0.0, 0.7, 1.9, 2.2, 4.0, 5.5]);
        let p = ModelParams::new(0.03, 0.1, 0.4, 1.0).unwrap();
        let ctrl = ControlVector(vec![Control::Low, Control::High, Control::High, Control::Low]);
        let op = assemble(&g, &p, &ctrl).unwrap();
        let x = g.nodes();
        for i in 1..5 {
            let s = ctrl.at_node(i).sigma(&p);
            let a = s * s * (x[i] * x[i] / ((x[i] - x[i - 1]) * (x[i + 1] - x[i - 1])));
            assert_eq!(op.alpha()[i], a);
        }
        assert!(assemble(&g, &p, &ControlVector(vec![Control::Low])).is_err());
    }

    proptest! {
        #[test]
        fn every_policy_gives_an_m_matrix(
            bits in proptest::collection::vec(any::<bool>(), 30),
            r in 0.0f64..0.3, dt in 1e-4f64..0.1,
        ) {
            let g = grid((0..=31).map(|i| (i as f64).powf(1.3)).collect());
            let p = ModelParams::new(r, 0.05, 0.6, 1.0).unwrap();
            let ctrl = ControlVector(bits.iter().map(|&b| if b { Control::High } else { Control::Low }).collect());
            let op = assemble(&g, &p, &ctrl).unwrap();
            prop_assert!(op.alpha().iter().all(|&a| a >= 0.0));
            prop_assert!(op.beta().iter().all(|&b| b >= 0.0));
            prop_assert!(op.m_matrix_check(dt).passed());
        }

        #[test]
        fn coefficients_scale_with_sigma_squared(lambda in 0.1f64..5.0) {
            let g = grid(vec![0.0, 1.0, 2.5, 3.0, 5.0]);
            let p1 = ModelParams::fixed_volatility(0.05, 0.2, 1.0).unwrap();
            let p2 = ModelParams::fixed_volatility(0.05, 0.2 * lambda, 1.0).unwrap();
            let c = ControlVector::uniform(3, Control::High);
            let (o1, o2) = (assemble(&g, &p1, &c).unwrap(), assemble(&g, &p2, &c).unwrap());
            for i in 1..4 {
                prop_assert!((o2.alpha()[i] - lambda * lambda * o1.alpha()[i]).abs() <= 1e-12 * o2.alpha()[i]);
                prop_assert!((o2.beta()[i] - lambda * lambda * o1.beta()[i]).abs() <= 1e-12 * o2.beta()[i]);
            }
        }

        #[test]
        fn apply_is_linear(
            u in proptest::collection::vec(-10.0f64..10.0, 6),
            v in proptest::collection::vec(-10.0f64..10.0, 6),
            a in -3.0f64..3.0, b in -3.0f64..3.0,
        ) {
            let g = grid(vec![0.0, 0.5, 1.7, 2.0, 3.1, 4.0]);
            let p = ModelParams::new(0.05, 0.1, 0.3, 1.0).unwrap();
            let op = assemble(&g, &p, &ControlVector(vec![Control::Low, Control::High, Control::Low, Control::High])).unwrap();
            let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let (au, av, aw) = (op.apply(&u).unwrap(), op.apply(&v).unwrap(), op.apply(&w).unwrap());
            for i in 0..6 {
                prop_assert!((aw[i] - (a * au[i] + b * av[i])).abs() <= 1e-10);
            }
        }
    }
}
