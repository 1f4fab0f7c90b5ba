//! Bid and ask prices of European claims when the volatility is only known to
//! lie in a band `[sigma_lo, sigma_hi]`.
//!
//! The ask price solves the Black–Scholes–Barenblatt equation
//!
//! ```text
//! u_τ − r x u_x − x² G(u_xx) + r u = 0,    u(0, x) = φ(x),
//! G(a) = ½ (σ̄² a⁺ − σ̲² a⁻)
//! ```
//!
//! in time-to-maturity `τ`. The convection term is discretised along the
//! characteristic `x̄ = x + r x Δt`, the diffusion with a central three-point
//! stencil, and each implicit step is a nonlinear M-matrix system solved by
//! policy iteration over the two band endpoints. The bid price is the negated
//! ask price of the negated claim.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(a > b)` is used on purpose so that NaN fails the test
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod grid;
pub mod model;
pub mod operator;
pub mod oracle;
pub mod policy;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{build_grid, characteristic_feet, interpolate_at_feet, Grid, Spacing, StepFeet};
pub use model::{BoundarySpec, Curvature, FarField, ModelParams, Payoff, PayoffKind, Side};
pub use operator::{assemble, Control, ControlVector, DiscreteOperator, MMatrixReport};
pub use policy::{policy_iterate, select_policy, solve_implicit_step, solve_tridiagonal, PolicyIterationReport, PolicySettings};
pub use stepper::{solve, stability_audit, PriceSurface, StabilityReport};
