//! Closed-form lognormal prices, independent of the finite-difference path.
//!
//! The normal CDF goes through `erfc` (fdlibm's rational approximations, as
//! ported in `libm`), accurate to a few ulps over the whole real line.

use crate::error::{Error, Result};
use crate::model::{ModelParams, Payoff, PayoffKind, Side};

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

fn check(sigma: f64, tau: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter { name: "sigma", value: sigma, reason: "must be finite and positive" });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter { name: "tau", value: tau, reason: "must be finite and positive" });
    }
    Ok(())
}

/// European call. `strike ≤ 0` gives the forward `spot − strike·e^{−rτ}`.
pub fn bs_call(spot: f64, strike: f64, rate: f64, sigma: f64, tau: f64) -> Result<f64> {
    check(sigma, tau)?;
    let df = libm::exp(-rate * tau);
    if strike <= 0.0 {
        return Ok(spot - strike * df);
    }
    if spot <= 0.0 {
        return Ok(0.0);
    }
    let vol = sigma * libm::sqrt(tau);
    let d1 = (libm::log(spot / strike) + (rate + 0.5 * sigma * sigma) * tau) / vol;
    let d2 = d1 - vol;
    Ok(spot * norm_cdf(d1) - strike * df * norm_cdf(d2))
}

pub fn bs_put(spot: f64, strike: f64, rate: f64, sigma: f64, tau: f64) -> Result<f64> {
    Ok(bs_call(spot, strike, rate, sigma, tau)? - spot + strike * libm::exp(-rate * tau))
}

/// Digital call paying 1 when `S_T ≥ strike`: `e^{−rτ} N(d2)`.
pub fn bs_digital(spot: f64, strike: f64, rate: f64, sigma: f64, tau: f64) -> Result<f64> {
    check(sigma, tau)?;
    let df = libm::exp(-rate * tau);
    if strike <= 0.0 {
        return Ok(df);
    }
    if spot <= 0.0 {
        return Ok(0.0);
    }
    let vol = sigma * libm::sqrt(tau);
    let d2 = (libm::log(spot / strike) + (rate - 0.5 * sigma * sigma) * tau) / vol;
    Ok(df * norm_cdf(d2))
}

/// A priced Black–Scholes quote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsQuote {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub volatility: f64,
    pub tau: f64,
    pub price: f64,
}

impl BsQuote {
    pub fn call(spot: f64, strike: f64, rate: f64, volatility: f64, tau: f64) -> Result<Self> {
        let price = bs_call(spot, strike, rate, volatility, tau)?;
        Ok(Self { spot, strike, rate, volatility, tau, price })
    }

    pub fn digital(spot: f64, strike: f64, rate: f64, volatility: f64, tau: f64) -> Result<Self> {
        let price = bs_digital(spot, strike, rate, volatility, tau)?;
        Ok(Self { spot, strike, rate, volatility, tau, price })
    }
}

fn kind_price(kind: &PayoffKind, spot: f64, rate: f64, sigma: f64, tau: f64) -> Result<f64> {
    let df = libm::exp(-rate * tau);
    match kind {
        PayoffKind::VanillaCall { strike } => bs_call(spot, *strike, rate, sigma, tau),
        PayoffKind::VanillaPut { strike } => bs_put(spot, *strike, rate, sigma, tau),
        PayoffKind::DigitalCall { strike } => bs_digital(spot, *strike, rate, sigma, tau),
        PayoffKind::Butterfly { k1, k2 } => {
            let mid = 0.5 * (k1 + k2);
            Ok(bs_call(spot, *k1, rate, sigma, tau)? - 2.0 * bs_call(spot, mid, rate, sigma, tau)?
                + bs_call(spot, *k2, rate, sigma, tau)?)
        }
        PayoffKind::Constant(c) => Ok(c * df),
        PayoffKind::PiecewiseLinear { breakpoints } => {
            // φ(s) = a + m₀ s + Σ_j (m_j − m_{j−1}) (s − s_j)⁺
            let (s0, v0) = breakpoints[0];
            if breakpoints.len() == 1 {
                return Ok(v0 * df);
            }
            let slope = |j: usize| {
                let (a, b) = (breakpoints[j], breakpoints[j + 1]);
                (b.1 - a.1) / (b.0 - a.0)
            };
            let m0 = slope(0);
            let mut total = (v0 - m0 * s0) * df + m0 * spot;
            for (j, point) in breakpoints.iter().enumerate().take(breakpoints.len() - 1).skip(1) {
                let kink = slope(j) - slope(j - 1);
                if kink != 0.0 {
                    total += kink * bs_call(spot, point.0, rate, sigma, tau)?;
                }
            }
            Ok(total)
        }
        PayoffKind::Portfolio(legs) => {
            let mut total = 0.0;
            for (w, leg) in legs {
                total += w * kind_price(leg, spot, rate, sigma, tau)?;
            }
            Ok(total)
        }
    }
}

/// Black–Scholes value of `payoff` (sign included) at a single volatility.
pub fn price_fixed_volatility(payoff: &Payoff, spot: f64, rate: f64, sigma: f64, tau: f64) -> Result<f64> {
    check(sigma, tau)?;
    let v = kind_price(payoff.kind(), spot, rate, sigma, tau)?;
    Ok(if payoff.is_negated() { -v } else { v })
}

/// Closed-form price of `payoff.side()` when one exists: collapsed bands,
/// and convex or concave claims, where the worst case is a constant endpoint
/// volatility. `None` otherwise.
pub fn reference_price(payoff: &Payoff, params: &ModelParams, spot: f64, tau: f64) -> Option<f64> {
    use crate::model::Curvature;
    let sigma = if params.is_degenerate() {
        params.sigma_hi()
    } else {
        // ask of a convex claim runs at σ̄, of a concave one at σ̲; the bid is the mirror image
        let convex_high = match payoff.curvature() {
            Curvature::Convex | Curvature::Affine => true,
            Curvature::Concave => false,
            Curvature::Mixed => return None,
        };
        match (payoff.side(), convex_high) {
            (Side::Ask, true) | (Side::Bid, false) => params.sigma_hi(),
            _ => params.sigma_lo(),
        }
    };
    price_fixed_volatility(payoff, spot, params.rate(), sigma, tau).ok()
}
