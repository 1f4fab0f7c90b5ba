//! Space/time partitions and the characteristic feet `x̄_i = x_i (1 + r Δt)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{BoundarySpec, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spacing {
    Uniform,
    /// Nodes concentrated around `center` by a sinh stretching; `ratio` is the
    /// largest cell width divided by the smallest one (`1` is uniform).
    Clustered { center: f64, ratio: f64 },
}

/// Nodes `0 = x_0 < … < x_N = S_max` and steps `Δt_1..Δt_M` summing to `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    steps: Vec<f64>,
    taus: Vec<f64>,
}

impl Grid {
    /// Grid from explicit partitions. Rejects steps whose characteristic
    /// foot would leave its host cell for the given `rate`.
    pub fn from_partition(nodes: Vec<f64>, steps: Vec<f64>, rate: f64) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::DimensionMismatch { what: "spatial nodes", expected: 3, found: nodes.len() });
        }
        if steps.is_empty() {
            return Err(Error::DimensionMismatch { what: "time steps", expected: 1, found: 0 });
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidParameter { name: "x_0", value: nodes[0], reason: "first node must be 0" });
        }
        for (i, w) in nodes.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidParameter {
                    name: "nodes",
                    value: w[1],
                    reason: if i == 0 { "nodes must increase" } else { "nodes must be strictly increasing" },
                });
            }
        }
        for (n, &dt) in steps.iter().enumerate() {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::NonFinite { what: "time step", index: n + 1 });
            }
        }
        let mut taus = Vec::with_capacity(steps.len() + 1);
        taus.push(0.0);
        let mut acc = 0.0;
        for dt in &steps {
            acc += dt;
            taus.push(acc);
        }
        let grid = Self { nodes, steps, taus };
        grid.check_admissible(rate)?;
        Ok(grid)
    }

    fn check_admissible(&self, rate: f64) -> Result<()> {
        if rate == 0.0 {
            return Ok(());
        }
        let max_dt = self.max_admissible_dt(rate);
        let n_int = self.n_intervals();
        for (n, &dt) in self.steps.iter().enumerate() {
            for i in 1..n_int {
                let x = self.nodes[i];
                if rate * x * dt > self.nodes[i + 1] - x {
                    return Err(Error::InadmissibleStep { node: i, step: n + 1, max_dt });
                }
            }
        }
        Ok(())
    }

    /// Largest `Δt` keeping every interior foot inside its cell.
    pub fn max_admissible_dt(&self, rate: f64) -> f64 {
        (1..self.n_intervals())
            .map(|i| (self.nodes[i + 1] - self.nodes[i]) / (rate * self.nodes[i]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Time to maturity at every level, `τ_0 = 0`.
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn tau(&self, level: usize) -> f64 {
        self.taus[level]
    }

    /// `N`, the number of cells.
    pub fn n_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    /// `M`, the number of time steps.
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn s_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn maturity(&self) -> f64 {
        self.taus[self.taus.len() - 1]
    }

    pub fn max_dx(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn max_dt(&self) -> f64 {
        self.steps.iter().copied().fold(0.0, f64::max)
    }

    /// Compares every cell width and step with `h = max(Δx, Δt)`.
    pub fn quasi_uniformity(&self, c1: f64, c2: f64) -> QuasiUniformity {
        let h = self.max_dx().max(self.max_dt());
        let widths = self.nodes.windows(2).map(|w| w[1] - w[0]);
        let all = widths.chain(self.steps.iter().copied());
        let (lo, hi) = all.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d / h), hi.max(d / h)));
        QuasiUniformity { h, c1, c2, min_ratio: lo, max_ratio: hi, satisfied: lo >= c1 && hi <= c2 }
    }

    /// Linear interpolation of nodal `values` at `s`, clamped to `[0, S_max]`.
    pub fn interpolate(&self, values: &[f64], s: f64) -> f64 {
        let x = &self.nodes;
        let s = s.clamp(0.0, self.s_max());
        let j = x.partition_point(|&xi| xi <= s).clamp(1, x.len() - 1) - 1;
        let w = (s - x[j]) / (x[j + 1] - x[j]);
        (1.0 - w) * values[j] + w * values[j + 1]
    }
}

/// Diagnostic for `C1·h ≤ Δx_i, Δt_n ≤ C2·h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiUniformity {
    pub h: f64,
    pub c1: f64,
    pub c2: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub satisfied: bool,
}

pub fn build_grid(
    params: &ModelParams,
    boundary: &BoundarySpec,
    n_space: usize,
    n_time: usize,
    spacing: Spacing,
) -> Result<Grid> {
    if n_space < 3 {
        return Err(Error::DimensionMismatch { what: "n_space", expected: 3, found: n_space });
    }
    if n_time < 1 {
        return Err(Error::DimensionMismatch { what: "n_time", expected: 1, found: n_time });
    }
    let s_max = boundary.s_max();
    let nodes = match spacing {
        Spacing::Uniform => uniform_nodes(s_max, n_space),
        Spacing::Clustered { center, ratio } => clustered_nodes(s_max, n_space, center, ratio)?,
    };
    let t = params.maturity();
    let dt = t / n_time as f64;
    let mut grid = Grid::from_partition(nodes, alloc::vec![dt; n_time], params.rate())?;
    for (n, tau) in grid.taus.iter_mut().enumerate() {
        *tau = t * n as f64 / n_time as f64;
    }
    Ok(grid)
}

fn uniform_nodes(s_max: f64, n: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..=n).map(|i| s_max * i as f64 / n as f64).collect();
    x[n] = s_max;
    x
}

// x(ξ) = c + a sinh(b (ξ − ξc)) on ξ ∈ [0, 1], with x(0) = 0 and x(1) = S_max.
fn clustered_nodes(s_max: f64, n: usize, center: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(center > 0.0 && center < s_max) {
        return Err(Error::InvalidParameter {
            name: "center",
            value: center,
            reason: "cluster center must lie strictly inside (0, S_max)",
        });
    }
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(Error::InvalidParameter { name: "ratio", value: ratio, reason: "must be finite and at least 1" });
    }
    if ratio == 1.0 {
        return Ok(uniform_nodes(s_max, n));
    }
    let rel = center / (s_max - center);
    let center_param = |b: f64| {
        bisect(0.0, 1.0, |xi| libm::sinh(b * xi) - rel * libm::sinh(b * (1.0 - xi)))
    };
    let stretch = |b: f64| {
        let xi = center_param(b);
        libm::cosh(b * xi.max(1.0 - xi)) - ratio
    };
    let ach = libm::acosh(ratio);
    let b = bisect(ach, 2.0 * ach, stretch);
    let xi_c = center_param(b);
    let a = center / libm::sinh(b * xi_c);
    let mut x: Vec<f64> = (0..=n)
        .map(|j| center + a * libm::sinh(b * (j as f64 / n as f64 - xi_c)))
        .collect();
    x[0] = 0.0;
    x[n] = s_max;
    Ok(x)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == (f_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Feet of the characteristics for one time step `n → n+1`.
///
/// Entry `i` of `foot`/`weight` belongs to node `i`; the foot of an interior
/// node lies in its own cell `[x_i, x_{i+1}]`, so the host interval is `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFeet {
    dt: f64,
    foot: Vec<f64>,
    weight: Vec<f64>,
}

impl StepFeet {
    /// Feet for step `step` (0-based, uses `Δt_{step+1}`).
    pub fn new(grid: &Grid, rate: f64, step: usize) -> Self {
        let dt = grid.steps[step];
        let x = &grid.nodes;
        let n = grid.n_intervals();
        let mut foot = Vec::with_capacity(n + 1);
        let mut weight = Vec::with_capacity(n + 1);
        foot.push(x[0]);
        weight.push(0.0);
        for i in 1..n {
            let shift = rate * x[i] * dt;
            foot.push(x[i] + shift);
            weight.push(shift / (x[i + 1] - x[i]));
        }
        foot.push(x[n]);
        weight.push(0.0);
        Self { dt, foot, weight }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn foot(&self) -> &[f64] {
        &self.foot
    }

    /// `θ_i = (x̄_i − x_i) / (x_{i+1} − x_i)`.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn host_interval(&self, node: usize) -> usize {
        node
    }
}

/// Feet for every step of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFeet {
    steps: Vec<StepFeet>,
}

impl CharacteristicFeet {
    pub fn step(&self, n: usize) -> &StepFeet {
        &self.steps[n]
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

pub fn characteristic_feet(grid: &Grid, rate: f64) -> CharacteristicFeet {
    CharacteristicFeet { steps: (0..grid.n_steps()).map(|n| StepFeet::new(grid, rate, n)).collect() }
}

/// `ū^n`: values of level `n` carried to the feet.
///
/// `ū_0 = u_0 / (1 + r Δt)` and `ū_N` is the Dirichlet value of the new level.
pub fn interpolate_at_feet(values: &[f64], feet: &StepFeet, boundary_next: f64, rate: f64) -> Result<Vec<f64>> {
    let len = feet.foot.len();
    if values.len() != len {
        return Err(Error::DimensionMismatch { what: "level values", expected: len, found: values.len() });
    }
    let n = len - 1;
    let mut out = Vec::with_capacity(len);
    out.push(values[0] / (1.0 + rate * feet.dt));
    for i in 1..n {
        let th = feet.weight[i];
        out.push((1.0 - th) * values[i] + th * values[i + 1]);
    }
    out.push(boundary_next);
    Ok(out)
}
