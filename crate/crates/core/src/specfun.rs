//! Special functions used by the reward-variance formula and the samplers.
//!
//! `exp_integral_ei` evaluates the principal-value exponential integral
//!
//! ```text
//! Ei(x) = -∫_{-x}^∞ e^{-t}/t dt
//! ```
//!
//! with four branches: the convergent power series for `0 < x <= 40` and
//! `-1 <= x < 0`, the divergent asymptotic expansion for `x > 40`, and the
//! Lentz continued fraction for `E1(-x) = -Ei(x)` when `x < -1`.

use crate::error::{Error, Result};

const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Positive arguments at or below this value use the power series.
pub const SERIES_ASYMPTOTIC_CROSSOVER: f64 = 40.0;

const EPS: f64 = 1e-17;
const MAX_TERMS: usize = 1000;

/// Euler–Mascheroni constant, nearest double.
#[inline]
pub fn euler_mascheroni() -> f64 {
    EULER_MASCHERONI
}

/// Exponential integral `Ei(x)` for real nonzero `x`.
///
/// Relative accuracy is about 1e-14 over `1e-6 <= |x| <= 700`. `Ei(0)` is a
/// logarithmic singularity and is reported as a domain error; arguments past
/// roughly 709 overflow a double and are reported as such.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("Ei(NaN) is undefined".into()));
    }
    if x == 0.0 {
        return Err(Error::Domain("Ei has a logarithmic singularity at 0".into()));
    }
    let value = if x > 0.0 {
        if x <= SERIES_ASYMPTOTIC_CROSSOVER {
            ei_series(x)
        } else {
            ei_asymptotic(x)
        }
    } else if x >= -1.0 {
        ei_series(x)
    } else {
        -e1_continued_fraction(-x)
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow(format!("Ei({x}) exceeds the double range")))
    }
}

/// `Γ + ln|x| + Σ_{k≥1} x^k / (k·k!)`.
pub(crate) fn ei_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..MAX_TERMS {
        let k = k as f64;
        term *= x / k;
        let contribution = term / k;
        sum += contribution;
        if contribution.abs() <= EPS * sum.abs() {
            break;
        }
    }
    EULER_MASCHERONI + x.abs().ln() + sum
}

/// `e^x / x · Σ_k k!/x^k`, truncated at the smallest term.
pub(crate) fn ei_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        let next = term * k as f64 / x;
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= EPS * sum {
            break;
        }
    }
    // Split the exponential so that e^x/x survives slightly past e^x's own overflow point.
    let half = (0.5 * x).exp();
    half * (half / x) * sum
}

/// `E1(x)` for `x > 1` via the modified Lentz continued fraction.
fn e1_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() <= 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}

/// `ln(n!)`; exact products up to 17!, Stirling series beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if n <= 17 {
        let mut product = 1.0;
        for k in 2..=n {
            product *= k as f64;
        }
        return product.ln();
    }
    let z = n as f64 + 1.0;
    let z2 = z * z;
    let correction = (1.0 / 12.0
        - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2)
        / z;
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + correction
}
