//! Waiting time until a miner's first block and the bankruptcy it can cause.
//!
//! With constant power the number of wins in `x` epochs is Poisson with mean
//! `x·E·q`, so the first-win time is exponential with rate `λ_w = E·q`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, ensure_probability, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitParams {
    pub expected_blocks: f64,
    pub win_probability: f64,
    /// Wins per epoch, `E·q`.
    pub rate: f64,
}

impl WaitParams {
    pub fn new(expected_blocks: f64, win_probability: f64) -> Result<Self> {
        ensure_positive("expected_blocks", expected_blocks)?;
        ensure_probability("win_probability", win_probability)?;
        Ok(Self { expected_blocks, win_probability, rate: expected_blocks * win_probability })
    }

    fn positive_rate(&self, what: &str) -> Result<f64> {
        if self.rate > 0.0 {
            Ok(self.rate)
        } else {
            Err(Error::Degenerate(format!("{what} is undefined for a zero win rate")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankruptcyInputs {
    pub initial_wealth: f64,
    pub cost_per_epoch: f64,
}

impl BankruptcyInputs {
    pub fn new(initial_wealth: f64, cost_per_epoch: f64) -> Result<Self> {
        ensure_positive("initial_wealth", initial_wealth)?;
        ensure_positive("cost_per_epoch", cost_per_epoch)?;
        Ok(Self { initial_wealth, cost_per_epoch })
    }
}

fn ensure_epochs(x: f64) -> Result<()> {
    if x >= 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid("x", format!("waiting time must be nonnegative, got {x}")))
    }
}

/// `P(first win ≤ x) = 1 - e^{-x·E·q}`.
pub fn waiting_cdf(x: f64, params: &WaitParams) -> Result<f64> {
    ensure_epochs(x)?;
    if params.rate == 0.0 {
        return Ok(0.0);
    }
    Ok(-(-x * params.rate).exp_m1())
}

pub fn waiting_pdf(x: f64, params: &WaitParams) -> Result<f64> {
    ensure_epochs(x)?;
    let rate = params.positive_rate("waiting-time density")?;
    Ok(rate * (-x * rate).exp())
}

/// Mean wait `1/(E·q)` in epochs.
pub fn expected_wait(params: &WaitParams) -> Result<f64> {
    if params.rate == 0.0 {
        return Err(Error::Degenerate("a miner with zero win rate waits forever".into()));
    }
    Ok(1.0 / params.rate)
}

pub fn wait_variance(params: &WaitParams) -> Result<f64> {
    let mean = expected_wait(params)?;
    Ok(mean * mean)
}

/// Epochs until the reserve is spent with no earnings, `⌈W0 / C⌉`.
pub fn bankruptcy_horizon(inputs: &BankruptcyInputs) -> u64 {
    (inputs.initial_wealth / inputs.cost_per_epoch).ceil() as u64
}

/// Probability of no win before the reserve runs out, `e^{-x*·E·q}`.
///
/// A lower bound on ruin: a win smaller than the accrued costs is counted as a rescue.
pub fn bankruptcy_probability(inputs: &BankruptcyInputs, params: &WaitParams) -> f64 {
    let horizon = bankruptcy_horizon(inputs) as f64;
    (-horizon * params.rate).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::adaptive_simpson;

    fn wp(e: f64, q: f64) -> WaitParams {
        WaitParams::new(e, q).unwrap()
    }

    #[test]
    fn cdf_values() {
        assert_eq!(waiting_cdf(0.0, &wp(10.0, 0.001)).unwrap(), 0.0);
        let v = waiting_cdf(100.0, &wp(10.0, 0.001)).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.6321205588285577).abs() < 1e-15);
        assert_eq!(waiting_cdf(1e9, &wp(10.0, 0.0)).unwrap(), 0.0);
        assert!(waiting_cdf(-1.0, &wp(1.0, 0.1)).is_err());
    }

    #[test]
    fn pdf_values() {
        let p = wp(10.0, 0.02);
        assert_eq!(waiting_pdf(0.0, &p).unwrap(), 0.2);
        let v = waiting_pdf(500.0, &wp(0.1, 0.02)).unwrap();
        assert!((v - 0.002 * (-1.0f64).exp()).abs() < 1e-18);
        assert!(matches!(waiting_pdf(1.0, &wp(1.0, 0.0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pdf_integrates_to_one() {
        let p = wp(10.0, 0.005);
        let upper = 100.0 / p.rate;
        let q = adaptive_simpson(|x| waiting_pdf(x, &p).unwrap(), 0.0, upper, 1e-14, 0.0).unwrap();
        assert!(q.value >= 1.0 - 1e-12, "{}", q.value);
    }

    #[test]
    fn moments() {
        assert!((expected_wait(&wp(0.1, 0.001)).unwrap() - 10_000.0).abs() < 1e-9);
        assert!((expected_wait(&wp(10.0, 0.001)).unwrap() - 100.0).abs() < 1e-12);
        let var = wait_variance(&wp(0.1, 0.001)).unwrap();
        assert!((var - 1e8).abs() < 1e-4);
        let p = wp(2.0, 0.3);
        assert!((wait_variance(&p).unwrap().sqrt() - expected_wait(&p).unwrap()).abs() < 1e-15);
        assert!(matches!(expected_wait(&wp(1.0, 0.0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn horizons() {
        let h = |w, c| bankruptcy_horizon(&BankruptcyInputs::new(w, c).unwrap());
        assert_eq!(h(10.0, 1.0), 10);
        assert_eq!(h(10.5, 1.0), 11);
        assert_eq!(h(1.0, 3.0), 1);
        assert!(BankruptcyInputs::new(0.0, 1.0).is_err());
    }

    #[test]
    fn bankruptcy_values() {
        let inputs = BankruptcyInputs::new(100.0, 1.0).unwrap();
        assert_eq!(bankruptcy_probability(&inputs, &wp(10.0, 0.0)), 1.0);
        let p = bankruptcy_probability(&inputs, &wp(10.0, 0.001));
        assert!((p - (-1.0f64).exp()).abs() < 1e-15);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn memoryless(s in 0.0f64..500.0, t in 0.0f64..500.0, e in 0.1f64..10.0, q in 1e-4f64..0.1) {
                let p = wp(e, q);
                let tail = |x: f64| 1.0 - waiting_cdf(x, &p).unwrap();
                prop_assert!((tail(s + t) - tail(s) * tail(t)).abs() <= 1e-12);
            }

            #[test]
            fn cdf_monotone_and_saturating(a in 0.0f64..1e4, b in 0.0f64..1e4, e in 0.1f64..10.0, q in 1e-4f64..1.0) {
                let p = wp(e, q);
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(waiting_cdf(lo, &p).unwrap() <= waiting_cdf(hi, &p).unwrap());
                prop_assert!(waiting_cdf(1e3 / p.rate, &p).unwrap() >= 1.0 - 1e-12);
            }

            #[test]
            fn bankruptcy_nonincreasing(w in 0.1f64..1e3, dw in 0.0f64..1e3, q in 0.0f64..0.5, dq in 0.0f64..0.5) {
                let base = BankruptcyInputs::new(w, 1.0).unwrap();
                let richer = BankruptcyInputs::new(w + dw, 1.0).unwrap();
                let p = wp(2.0, q);
                let stronger = wp(2.0, q + dq);
                prop_assert!(bankruptcy_probability(&richer, &p) <= bankruptcy_probability(&base, &p));
                prop_assert!(bankruptcy_probability(&base, &stronger) <= bankruptcy_probability(&base, &p));
            }
        }
    }
}
