//! Monotone and convex/concave stretches of a payoff, and how far a priced
//! surface strays from them, measured in price units.

use barenblatt_core::{Payoff, PayoffKind};

/// Tolerance constant `c` in `tol = c·(Δx + Δt)`.
///
/// Fixed once from the refinement study of the vanilla call with band
/// [0.15, 0.25] from Δs = 1, Δt = 0.0025: the largest observed
/// `error / (Δx + Δt)` over four dyadic levels and both sides is 0.0764
/// (bid, finest level).
pub const GRID_TOLERANCE_CONSTANT: f64 = 0.08;

pub fn grid_tolerance(dx: f64, dt: f64) -> f64 {
    GRID_TOLERANCE_CONSTANT * (dx + dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Nondecreasing,
    Nonincreasing,
    Convex,
    Concave,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Nondecreasing => "nondecreasing",
            Shape::Nonincreasing => "nonincreasing",
            Shape::Convex => "convex",
            Shape::Concave => "concave",
        }
    }
}

/// An open interval `(lo, hi)` on which the payoff has `shape`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeInterval {
    pub shape: Shape,
    pub lo: f64,
    pub hi: f64,
}

fn strikes(kind: &PayoffKind, out: &mut Vec<f64>) {
    match kind {
        PayoffKind::VanillaCall { strike } | PayoffKind::VanillaPut { strike } | PayoffKind::DigitalCall { strike } => {
            out.push(*strike)
        }
        PayoffKind::Butterfly { k1, k2 } => out.extend([*k1, 0.5 * (k1 + k2), *k2]),
        PayoffKind::PiecewiseLinear { breakpoints } => out.extend(breakpoints.iter().map(|p| p.0)),
        PayoffKind::Constant(_) => {}
        PayoffKind::Portfolio(legs) => legs.iter().for_each(|(_, k)| strikes(k, out)),
    }
}

/// Slope change and jump at one breakpoint of a piecewise-linear payoff.
#[derive(Debug, Clone, Copy)]
struct Break {
    kink: f64,
    jump: f64,
}

/// Maximal shape intervals of `payoff` inside `(0, s_max)`.
pub fn payoff_intervals(payoff: &Payoff, s_max: f64) -> Vec<ShapeInterval> {
    let mut points = Vec::new();
    strikes(payoff.kind(), &mut points);
    points.retain(|&p| p > 0.0 && p < s_max);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut edges = vec![0.0];
    edges.extend(&points);
    edges.push(s_max);

    // slope of each linear piece, read off two interior samples
    let slopes: Vec<f64> = edges
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0] + 0.25 * (w[1] - w[0]), w[0] + 0.75 * (w[1] - w[0]));
            (payoff.evaluate(b) - payoff.evaluate(a)) / (b - a)
        })
        .collect();
    let limit = |piece: usize, x: f64| {
        let m = 0.5 * (edges[piece] + edges[piece + 1]);
        payoff.evaluate(m) + slopes[piece] * (x - m)
    };
    let scale = points.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    let eps = 1e-9 * scale;
    let breaks: Vec<Break> = points
        .iter()
        .enumerate()
        .map(|(j, &at)| Break { kink: slopes[j + 1] - slopes[j], jump: limit(j + 1, at) - limit(j, at) })
        .collect();

    // Flat pieces have no direction and affine stretches no curvature, so an
    // interval counts only if it holds a sloped piece or a kink of its sign.
    let mut out = Vec::new();
    let mut split = |shape: Shape, breaks_shape: &dyn Fn(&Break) -> bool, piece_ok: &dyn Fn(f64) -> bool| {
        let mut start: Option<(f64, bool)> = None;
        for j in 0..slopes.len() {
            let (a, b) = (edges[j], edges[j + 1]);
            if !piece_ok(slopes[j]) {
                if let Some((s, real)) = start.take() {
                    if real {
                        out.push(ShapeInterval { shape, lo: s, hi: a });
                    }
                }
                continue;
            }
            let mut real = start.is_some_and(|(_, r)| r);
            let lo = start.map_or(a, |(s, _)| s);
            real |= match shape {
                Shape::Nondecreasing => slopes[j] > eps || (j > 0 && start.is_some() && breaks[j - 1].jump > eps),
                Shape::Nonincreasing => slopes[j] < -eps || (j > 0 && start.is_some() && breaks[j - 1].jump < -eps),
                Shape::Convex => j > 0 && start.is_some() && breaks[j - 1].kink > eps,
                Shape::Concave => j > 0 && start.is_some() && breaks[j - 1].kink < -eps,
            };
            start = Some((lo, real));
            let ends_here = j < breaks.len() && breaks_shape(&breaks[j]);
            if ends_here || j + 1 == slopes.len() {
                let (lo, real) = start.take().unwrap();
                if real {
                    out.push(ShapeInterval { shape, lo, hi: b });
                }
            }
        }
    };
    split(Shape::Nondecreasing, &|b| b.jump < -eps, &|m| m >= -eps);
    split(Shape::Nonincreasing, &|b| b.jump > eps, &|m| m <= eps);
    split(Shape::Convex, &|b| b.kink < -eps || b.jump.abs() > eps, &|_| true);
    split(Shape::Concave, &|b| b.kink > eps || b.jump.abs() > eps, &|_| true);
    out
}

/// Largest reversal against a monotone direction.
pub fn monotone_defect(values: &[f64], increasing: bool) -> f64 {
    let mut extreme = if increasing { f64::NEG_INFINITY } else { f64::INFINITY };
    let mut worst = 0.0f64;
    for &v in values {
        if increasing {
            extreme = extreme.max(v);
            worst = worst.max(extreme - v);
        } else {
            extreme = extreme.min(v);
            worst = worst.max(v - extreme);
        }
    }
    worst
}

/// Largest height of the points above their greatest convex minorant.
pub fn convexity_defect(x: &[f64], u: &[f64]) -> f64 {
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (x[b] - x[a]) * (u[i] - u[a]) - (u[b] - u[a]) * (x[i] - x[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut worst = 0.0f64;
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in a..=b {
            let t = (x[i] - x[a]) / (x[b] - x[a]);
            worst = worst.max(u[i] - (u[a] + t * (u[b] - u[a])));
        }
    }
    worst
}

/// Defect of `u` against `interval.shape`, over nodes strictly inside it.
pub fn shape_defect(interval: &ShapeInterval, x: &[f64], u: &[f64]) -> f64 {
    let (xs, us): (Vec<f64>, Vec<f64>) =
        x.iter().zip(u).filter(|(s, _)| **s > interval.lo && **s < interval.hi).map(|(s, v)| (*s, *v)).unzip();
    if xs.len() < 2 {
        return 0.0;
    }
    match interval.shape {
        Shape::Nondecreasing => monotone_defect(&us, true),
        Shape::Nonincreasing => monotone_defect(&us, false),
        Shape::Convex => convexity_defect(&xs, &us),
        Shape::Concave => {
            let neg: Vec<f64> = us.iter().map(|v| -v).collect();
            convexity_defect(&xs, &neg)
        }
    }
}
