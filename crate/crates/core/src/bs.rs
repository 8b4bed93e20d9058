//! Zero-rate Black–Scholes call prices and implied volatility.

use thiserror::Error;

use crate::specfun::{std_normal_cdf, std_normal_pdf};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImpliedVolError {
    #[error("price {price} outside the no-arbitrage band ({lower}, {upper})")]
    OutOfBand { price: f64, lower: f64, upper: f64 },
    #[error("price {0} needs a volatility above the search range")]
    AboveRange(f64),
}

pub const SIGMA_MIN: f64 = 1e-8;
pub const SIGMA_MAX: f64 = 5.0;

pub fn bs_call(s0: f64, k: f64, t: f64, sigma: f64) -> f64 {
    let st = sigma * libm::sqrt(t);
    if !(st > 0.0) || k <= 0.0 {
        return (s0 - k).max(0.0);
    }
    let d1 = libm::log(s0 / k) / st + 0.5 * st;
    s0 * std_normal_cdf(d1) - k * std_normal_cdf(d1 - st)
}

pub fn bs_vega(s0: f64, k: f64, t: f64, sigma: f64) -> f64 {
    let st = sigma * libm::sqrt(t);
    let d1 = libm::log(s0 / k) / st + 0.5 * st;
    s0 * std_normal_pdf(d1) * libm::sqrt(t)
}

/// Volatility reproducing `price`: bisection on `[1e-8, 5]`, then Newton polish.
pub fn implied_vol_invert(price: f64, s0: f64, k: f64, t: f64) -> Result<f64, ImpliedVolError> {
    let lower = (s0 - k).max(0.0);
    if !(price > lower && price < s0) {
        return Err(ImpliedVolError::OutOfBand { price, lower, upper: s0 });
    }
    let f = |s: f64| bs_call(s0, k, t, s) - price;
    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    if f(lo) >= 0.0 {
        return Ok(lo);
    }
    if f(hi) < 0.0 {
        return Err(ImpliedVolError::AboveRange(price));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() <= 1e-10 * price.max(1e-300) && hi - lo < 1e-6 {
            lo = mid;
            hi = mid;
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-4 {
            break;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..50 {
        let v = f(s);
        let vega = bs_vega(s0, k, t, s);
        if !(vega > 0.0) {
            break;
        }
        let next = (s - v / vega).clamp(lo.min(s), hi.max(s));
        if (next - s).abs() <= 1e-15 * s {
            s = next;
            break;
        }
        s = next;
    }
    Ok(s)
}
