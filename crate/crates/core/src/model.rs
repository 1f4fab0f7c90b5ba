//! Market parameters, claims and far-field boundary data.
//!
//! Everything here is validated on construction and immutable afterwards.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Short rate, volatility band and maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    rate: f64,
    sigma_lo: f64,
    sigma_hi: f64,
    maturity: f64,
}

impl ModelParams {
    /// Uncertain-volatility model with `0 ≤ sigma_lo < sigma_hi`.
    pub fn new(rate: f64, sigma_lo: f64, sigma_hi: f64, maturity: f64) -> Result<Self> {
        check_common(rate, maturity)?;
        if !(sigma_lo >= 0.0 && sigma_lo.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma_lo",
                value: sigma_lo,
                reason: "must be finite and non-negative",
            });
        }
        if !(sigma_hi > sigma_lo && sigma_hi.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma_hi",
                value: sigma_hi,
                reason: "must be finite and strictly above sigma_lo",
            });
        }
        Ok(Self { rate, sigma_lo, sigma_hi, maturity })
    }

    /// A collapsed band `sigma_lo = sigma_hi = sigma`: the linear Black–Scholes
    /// equation solved by the same scheme.
    pub fn fixed_volatility(rate: f64, sigma: f64, maturity: f64) -> Result<Self> {
        check_common(rate, maturity)?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: sigma,
                reason: "must be finite and non-negative",
            });
        }
        Ok(Self { rate, sigma_lo: sigma, sigma_hi: sigma, maturity })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sigma_lo(&self) -> f64 {
        self.sigma_lo
    }

    pub fn sigma_hi(&self) -> f64 {
        self.sigma_hi
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_lo == self.sigma_hi
    }

    /// The sublinear generator `G(a) = ½(σ̄² a⁺ − σ̲² a⁻)`.
    pub fn generator(&self, a: f64) -> f64 {
        let pos = a.max(0.0);
        let neg = (-a).max(0.0);
        0.5 * (self.sigma_hi * self.sigma_hi * pos - self.sigma_lo * self.sigma_lo * neg)
    }
}

fn check_common(rate: f64, maturity: f64) -> Result<()> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "rate",
            value: rate,
            reason: "must be finite and non-negative",
        });
    }
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "maturity",
            value: maturity,
            reason: "must be finite and positive",
        });
    }
    Ok(())
}

/// Which price is wanted from a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Ask,
    Bid,
}

/// Shape of a payoff, as far as it can be read off its definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Affine,
    Convex,
    Concave,
    Mixed,
}

impl Curvature {
    fn flip(self) -> Self {
        match self {
            Curvature::Convex => Curvature::Concave,
            Curvature::Concave => Curvature::Convex,
            c => c,
        }
    }

    fn combine(self, other: Self) -> Self {
        match (self, other) {
            (Curvature::Affine, c) | (c, Curvature::Affine) => c,
            (a, b) if a == b => a,
            _ => Curvature::Mixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PayoffKind {
    VanillaCall { strike: f64 },
    VanillaPut { strike: f64 },
    /// Pays 1 when `s ≥ strike`.
    DigitalCall { strike: f64 },
    /// Long calls at `k1` and `k2`, short two calls at the midpoint.
    Butterfly { k1: f64, k2: f64 },
    /// Linear between `(s, value)` breakpoints, affine extrapolation on both ends.
    PiecewiseLinear { breakpoints: Vec<(f64, f64)> },
    Constant(f64),
    /// Weighted sum of other payoffs.
    Portfolio(Vec<(f64, PayoffKind)>),
}

impl PayoffKind {
    fn validate(&self) -> Result<()> {
        match self {
            PayoffKind::VanillaCall { strike }
            | PayoffKind::VanillaPut { strike }
            | PayoffKind::DigitalCall { strike } => positive("strike", *strike),
            PayoffKind::Butterfly { k1, k2 } => {
                positive("k1", *k1)?;
                positive("k2", *k2)?;
                if k1 >= k2 {
                    return Err(Error::InvalidParameter {
                        name: "k2",
                        value: *k2,
                        reason: "butterfly requires k1 < k2",
                    });
                }
                Ok(())
            }
            PayoffKind::PiecewiseLinear { breakpoints } => {
                if breakpoints.is_empty() {
                    return Err(Error::DimensionMismatch {
                        what: "piecewise-linear breakpoints",
                        expected: 1,
                        found: 0,
                    });
                }
                for (i, &(s, v)) in breakpoints.iter().enumerate() {
                    if !s.is_finite() || !v.is_finite() {
                        return Err(Error::NonFinite { what: "breakpoint", index: i });
                    }
                    if i > 0 && s <= breakpoints[i - 1].0 {
                        return Err(Error::NonMonotoneBreakpoints { index: i });
                    }
                }
                Ok(())
            }
            PayoffKind::Constant(c) => finite("constant", *c),
            PayoffKind::Portfolio(legs) => {
                for (w, leg) in legs {
                    finite("weight", *w)?;
                    leg.validate()?;
                }
                Ok(())
            }
        }
    }

    fn value(&self, s: f64) -> f64 {
        match self {
            PayoffKind::VanillaCall { strike } => (s - strike).max(0.0),
            PayoffKind::VanillaPut { strike } => (strike - s).max(0.0),
            PayoffKind::DigitalCall { strike } => {
                if s >= *strike {
                    1.0
                } else {
                    0.0
                }
            }
            PayoffKind::Butterfly { k1, k2 } => {
                let mid = 0.5 * (k1 + k2);
                (s - k1).max(0.0) - 2.0 * (s - mid).max(0.0) + (s - k2).max(0.0)
            }
            PayoffKind::PiecewiseLinear { breakpoints } => piecewise_linear(breakpoints, s),
            PayoffKind::Constant(c) => *c,
            PayoffKind::Portfolio(legs) => legs.iter().map(|(w, leg)| w * leg.value(s)).sum(),
        }
    }

    fn curvature(&self) -> Curvature {
        match self {
            PayoffKind::VanillaCall { .. } | PayoffKind::VanillaPut { .. } => Curvature::Convex,
            PayoffKind::DigitalCall { .. } | PayoffKind::Butterfly { .. } => Curvature::Mixed,
            PayoffKind::Constant(_) => Curvature::Affine,
            PayoffKind::PiecewiseLinear { breakpoints } => {
                let slopes: Vec<f64> = breakpoints
                    .windows(2)
                    .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                    .collect();
                slopes.windows(2).fold(Curvature::Affine, |acc, w| {
                    let c = if w[1] > w[0] {
                        Curvature::Convex
                    } else if w[1] < w[0] {
                        Curvature::Concave
                    } else {
                        Curvature::Affine
                    };
                    acc.combine(c)
                })
            }
            PayoffKind::Portfolio(legs) => legs.iter().fold(Curvature::Affine, |acc, (w, leg)| {
                let c = if *w > 0.0 {
                    leg.curvature()
                } else if *w < 0.0 {
                    leg.curvature().flip()
                } else {
                    Curvature::Affine
                };
                acc.combine(c)
            }),
        }
    }

    fn far_field(&self) -> FarField {
        match self {
            PayoffKind::VanillaCall { strike } => FarField::Affine {
                slope: 1.0,
                fixed: 0.0,
                discounted: -strike,
            },
            PayoffKind::VanillaPut { .. } | PayoffKind::Butterfly { .. } => FarField::constant(0.0),
            PayoffKind::DigitalCall { .. } => FarField::constant(1.0),
            PayoffKind::PiecewiseLinear { breakpoints } => {
                let n = breakpoints.len();
                let (s_last, v_last) = breakpoints[n - 1];
                let slope = if n == 1 {
                    0.0
                } else {
                    let (s_prev, v_prev) = breakpoints[n - 2];
                    (v_last - v_prev) / (s_last - s_prev)
                };
                FarField::Affine {
                    slope,
                    fixed: 0.0,
                    discounted: v_last - slope * s_last,
                }
            }
            PayoffKind::Constant(c) => FarField::Affine {
                slope: 0.0,
                fixed: 0.0,
                discounted: *c,
            },
            PayoffKind::Portfolio(legs) => legs
                .iter()
                .fold(FarField::constant(0.0), |acc, (w, leg)| {
                    acc.affine_add(&leg.far_field().scaled(*w))
                }),
        }
    }

    fn largest_strike(&self) -> Option<f64> {
        match self {
            PayoffKind::VanillaCall { strike }
            | PayoffKind::VanillaPut { strike }
            | PayoffKind::DigitalCall { strike } => Some(*strike),
            PayoffKind::Butterfly { k2, .. } => Some(*k2),
            PayoffKind::PiecewiseLinear { breakpoints } => {
                breakpoints.last().map(|b| b.0).filter(|s| *s > 0.0)
            }
            PayoffKind::Constant(_) => None,
            PayoffKind::Portfolio(legs) => legs
                .iter()
                .filter_map(|(_, leg)| leg.largest_strike())
                .fold(None, |acc: Option<f64>, k| Some(acc.map_or(k, |a| a.max(k)))),
        }
    }
}

fn piecewise_linear(points: &[(f64, f64)], s: f64) -> f64 {
    if points.len() == 1 {
        return points[0].1;
    }
    let idx = points.partition_point(|p| p.0 <= s);
    let j = idx.saturating_sub(1).min(points.len() - 2);
    let (s0, v0) = points[j];
    let (s1, v1) = points[j + 1];
    v0 + (v1 - v0) * (s - s0) / (s1 - s0)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value: v, reason: "must be finite and positive" })
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value: v, reason: "must be finite" })
    }
}

/// Terminal claim `φ(S_T)` together with the side to be priced.
///
/// Negation is carried as a flag so that `evaluate` of a negated payoff is
/// the exact floating-point negation of the original.
#[derive(Debug, Clone, PartialEq)]
pub struct Payoff {
    kind: PayoffKind,
    side: Side,
    negated: bool,
}

impl Payoff {
    pub fn new(kind: PayoffKind, side: Side) -> Result<Self> {
        kind.validate()?;
        Ok(Self { kind, side, negated: false })
    }

    pub fn ask(kind: PayoffKind) -> Result<Self> {
        Self::new(kind, Side::Ask)
    }

    pub fn bid(kind: PayoffKind) -> Result<Self> {
        Self::new(kind, Side::Bid)
    }

    pub fn kind(&self) -> &PayoffKind {
        &self.kind
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn evaluate(&self, s: f64) -> f64 {
        let v = self.kind.value(s);
        if self.negated {
            -v
        } else {
            v
        }
    }

    /// Pointwise negation; the side is kept.
    pub fn negate(&self) -> Self {
        Self { kind: self.kind.clone(), side: self.side, negated: !self.negated }
    }

    /// `λ·φ` for a finite `λ`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        finite("lambda", lambda)?;
        Ok(Self {
            kind: PayoffKind::Portfolio(alloc::vec![(lambda, self.kind.clone())]),
            side: self.side,
            negated: self.negated,
        })
    }

    pub fn curvature(&self) -> Curvature {
        let c = self.kind.curvature();
        if self.negated {
            c.flip()
        } else {
            c
        }
    }

    /// Asymptotic affine boundary data at `S_max` for this claim.
    ///
    /// Calls use `S − K e^{−rτ}`, digitals the constant 1, butterflies and
    /// puts 0, piecewise-linear tables the last segment with a discounted
    /// intercept.
    pub fn default_far_field(&self) -> FarField {
        let ff = self.kind.far_field();
        if self.negated {
            ff.negated()
        } else {
            ff
        }
    }

    /// Default truncation `S_max = 2 × (largest strike)`, if the claim has one.
    pub fn default_s_max(&self) -> Option<f64> {
        self.kind.largest_strike().map(|k| 2.0 * k)
    }
}

pub fn evaluate_payoff(payoff: &Payoff, s: f64) -> f64 {
    payoff.evaluate(s)
}

pub fn negate_payoff(payoff: &Payoff) -> Payoff {
    payoff.negate()
}

/// Dirichlet data `g(τ, S_max) = b(τ) S_max + c(τ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FarField {
    /// `slope·S + fixed + discounted·e^{−rτ}`.
    Affine { slope: f64, fixed: f64, discounted: f64 },
    /// `b[n]·S + c[n]` per time level `n = 0..=M`.
    Table { slope: Vec<f64>, intercept: Vec<f64> },
}

impl FarField {
    pub fn constant(c: f64) -> Self {
        FarField::Affine { slope: 0.0, fixed: c, discounted: 0.0 }
    }

    pub fn value(&self, level: usize, tau: f64, s_max: f64, rate: f64) -> Result<f64> {
        match self {
            FarField::Affine { slope, fixed, discounted } => {
                let df = if *discounted == 0.0 { 0.0 } else { libm::exp(-rate * tau) };
                Ok(slope * s_max + fixed + discounted * df)
            }
            FarField::Table { slope, intercept } => {
                match (slope.get(level), intercept.get(level)) {
                    (Some(b), Some(c)) => Ok(b * s_max + c),
                    _ => Err(Error::DimensionMismatch {
                        what: "far-field table",
                        expected: level + 1,
                        found: slope.len().min(intercept.len()),
                    }),
                }
            }
        }
    }

    /// Number of levels a table covers, `None` for closed-form data.
    pub fn levels(&self) -> Option<usize> {
        match self {
            FarField::Affine { .. } => None,
            FarField::Table { slope, intercept } => Some(slope.len().min(intercept.len())),
        }
    }

    pub fn negated(&self) -> Self {
        match self {
            FarField::Affine { slope, fixed, discounted } => FarField::Affine {
                slope: -slope,
                fixed: -fixed,
                discounted: -discounted,
            },
            FarField::Table { slope, intercept } => FarField::Table {
                slope: slope.iter().map(|b| -b).collect(),
                intercept: intercept.iter().map(|c| -c).collect(),
            },
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        match self {
            FarField::Affine { slope, fixed, discounted } => FarField::Affine {
                slope: lambda * slope,
                fixed: lambda * fixed,
                discounted: lambda * discounted,
            },
            FarField::Table { slope, intercept } => FarField::Table {
                slope: slope.iter().map(|b| lambda * b).collect(),
                intercept: intercept.iter().map(|c| lambda * c).collect(),
            },
        }
    }

    /// Sum of two far fields. Tables are added level by level.
    pub fn add(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (FarField::Table { slope: b1, intercept: c1 }, FarField::Table { slope: b2, intercept: c2 }) => {
                let n = b1.len().min(c1.len());
                let m = b2.len().min(c2.len());
                if n != m {
                    return Err(Error::DimensionMismatch { what: "far-field table", expected: n, found: m });
                }
                Ok(FarField::Table {
                    slope: (0..n).map(|i| b1[i] + b2[i]).collect(),
                    intercept: (0..n).map(|i| c1[i] + c2[i]).collect(),
                })
            }
            (FarField::Affine { .. }, FarField::Affine { .. }) => Ok(self.affine_add(other)),
            _ => Err(Error::InvalidParameter {
                name: "far_field",
                value: f64::NAN,
                reason: "cannot add a table to closed-form far-field data",
            }),
        }
    }

    fn affine_add(&self, other: &Self) -> Self {
        match (self, other) {
            (
                FarField::Affine { slope: b1, fixed: f1, discounted: d1 },
                FarField::Affine { slope: b2, fixed: f2, discounted: d2 },
            ) => FarField::Affine { slope: b1 + b2, fixed: f1 + f2, discounted: d1 + d2 },
            _ => self.clone(),
        }
    }

    /// Upper bound of `|g(τ, s_max)|` over every admissible `τ ≥ 0`.
    pub fn sup_abs(&self, s_max: f64) -> f64 {
        match self {
            FarField::Affine { slope, fixed, discounted } => {
                let base = slope * s_max + fixed;
                libm::fabs(base + discounted).max(libm::fabs(base))
            }
            FarField::Table { slope, intercept } => slope
                .iter()
                .zip(intercept)
                .map(|(b, c)| libm::fabs(b * s_max + c))
                .fold(0.0, f64::max),
        }
    }
}

/// Upper spatial cutoff, far-field data and the asserted bound `C_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    s_max: f64,
    far_field: FarField,
    bound: f64,
}

impl BoundarySpec {
    /// Checks `|g(τ, s_max)| ≤ bound` for every supplied level.
    pub fn new(s_max: f64, far_field: FarField, bound: f64) -> Result<Self> {
        positive("s_max", s_max)?;
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "bound",
                value: bound,
                reason: "must be finite and non-negative",
            });
        }
        match &far_field {
            FarField::Affine { slope, fixed, discounted } => {
                for v in [*slope, *fixed, *discounted] {
                    finite("far_field", v)?;
                }
                let sup = far_field.sup_abs(s_max);
                if sup > bound {
                    return Err(Error::FarFieldExceedsBound { level: 0, value: sup, bound });
                }
            }
            FarField::Table { slope, intercept } => {
                if slope.len() != intercept.len() {
                    return Err(Error::DimensionMismatch {
                        what: "far-field intercept table",
                        expected: slope.len(),
                        found: intercept.len(),
                    });
                }
                for (level, (b, c)) in slope.iter().zip(intercept).enumerate() {
                    let g = b * s_max + c;
                    if !g.is_finite() {
                        return Err(Error::NonFinite { what: "far-field value", index: level });
                    }
                    if libm::fabs(g) > bound {
                        return Err(Error::FarFieldExceedsBound { level, value: g, bound });
                    }
                }
            }
        }
        Ok(Self { s_max, far_field, bound })
    }

    /// Uses the smallest valid `C_b`.
    pub fn tight(s_max: f64, far_field: FarField) -> Result<Self> {
        let bound = far_field.sup_abs(s_max);
        Self::new(s_max, far_field, bound)
    }

    /// Default boundary of a payoff: `S_max` from the argument or twice the
    /// largest strike, far field from [`Payoff::default_far_field`].
    pub fn for_payoff(payoff: &Payoff, s_max: Option<f64>) -> Result<Self> {
        let s_max = match s_max.or_else(|| payoff.default_s_max()) {
            Some(s) => s,
            None => {
                return Err(Error::InvalidParameter {
                    name: "s_max",
                    value: f64::NAN,
                    reason: "payoff has no strike; S_max must be given",
                })
            }
        };
        Self::tight(s_max, payoff.default_far_field())
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn far_field(&self) -> &FarField {
        &self.far_field
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn negated(&self) -> Self {
        Self { s_max: self.s_max, far_field: self.far_field.negated(), bound: self.bound }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            s_max: self.s_max,
            far_field: self.far_field.scaled(lambda),
            bound: libm::fabs(lambda) * self.bound,
        }
    }
}
