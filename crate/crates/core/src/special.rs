//! Special functions used by the outage analytics.
//!
//! The generalized Marcum Q-function of order one half has a closed form in
//! Gaussian tails: with `Z ~ N(0, 1)`,
//!
//! ```text
//! Q_{1/2}(a, b) = P(|Z + a| > b) = Q(b - a) + Q(b + a)
//! ```
//!
//! where `Q(x) = erfc(x / sqrt 2) / 2`. Everything here is evaluated through
//! `erfc`, with an asymptotic series for the logarithm of far tails where
//! `erfc` underflows.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Arguments above this use the asymptotic series in [`ln_gauss_tail`].
const LN_TAIL_SERIES_FROM: f64 = 35.0;

/// Upper tail of the standard normal distribution, `P(Z > x)`.
pub fn gauss_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF.
pub fn gauss_cdf(x: f64) -> f64 {
    gauss_tail(-x)
}

/// `ln Q(x)`, finite for every finite `x`.
pub fn ln_gauss_tail(x: f64) -> f64 {
    if x < LN_TAIL_SERIES_FROM {
        return gauss_tail(x).ln();
    }
    // Q(x) ~ phi(x)/x * (1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8 - 945/x^10)
    let inv2 = 1.0 / (x * x);
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..=5 {
        term *= -((2 * k - 1) as f64) * inv2;
        series += term;
    }
    -0.5 * x * x - (x * (2.0 * PI).sqrt()).ln() + series.ln()
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn check_marcum_args(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::domain(format!(
            "Marcum Q arguments must be non-negative, got a = {a}, b = {b}"
        )));
    }
    Ok(())
}

/// Generalized Marcum Q-function of order 1/2.
pub fn marcum_q_half(a: f64, b: f64) -> Result<f64> {
    check_marcum_args(a, b)?;
    if b == 0.0 {
        return Ok(1.0);
    }
    Ok((gauss_tail(b - a) + gauss_tail(b + a)).clamp(0.0, 1.0))
}

/// `1 - Q_{1/2}(a, b)`, accurate when the result is tiny.
pub fn marcum_q_half_complement(a: f64, b: f64) -> Result<f64> {
    check_marcum_args(a, b)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    // P(|Z + a| <= b) = Q(a - b) - Q(a + b)
    Ok((gauss_tail(a - b) - gauss_tail(a + b)).clamp(0.0, 1.0))
}

/// `ln Q_{1/2}(a, b)`, usable when `Q_{1/2}` underflows.
pub fn ln_marcum_q_half(a: f64, b: f64) -> Result<f64> {
    check_marcum_args(a, b)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    Ok(ln_add_exp(ln_gauss_tail(b - a), ln_gauss_tail(b + a)).min(0.0))
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
///
/// Arguments within a few ulps of a non-zero integer return exactly zero, so
/// that element spacings that are integer multiples of half a wavelength give
/// exactly uncorrelated entries.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let nearest = x.round();
    if nearest != 0.0 && (x - nearest).abs() <= 1e-12 * nearest.abs().max(1.0) {
        return 0.0;
    }
    let px = PI * x;
    px.sin() / px
}
