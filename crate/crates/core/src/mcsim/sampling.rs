//! Seeded random variates.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded from a `u64` and split into
//! independent 64-bit stream ids. Uniforms take the top 53 bits of each output
//! word, so every variate below is a fixed function of the word sequence and
//! reproduces bit-for-bit across platforms.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::specfun::ln_factorial;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Means at or below this use sequential-search inversion; above it, transformed rejection.
pub const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG_53
    }

    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform_open().ln() / rate
    }
}

/// Poisson sampler with its per-mean constants precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Poisson {
    mean: f64,
    exp_neg_mean: f64,
    log_mean: f64,
    // transformed-rejection constants
    a: f64,
    b: f64,
    inv_alpha: f64,
    v_r: f64,
}

impl Poisson {
    pub fn new(mean: f64) -> Self {
        let b = 0.931 + 2.53 * mean.sqrt();
        Self {
            mean,
            exp_neg_mean: (-mean).exp(),
            log_mean: mean.ln(),
            a: -0.059 + 0.02483 * b,
            b,
            inv_alpha: 1.1239 + 1.1328 / (b - 3.4),
            v_r: 0.9277 - 3.6224 / (b - 2.0),
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample(&self, rng: &mut SimRng) -> u64 {
        if self.mean <= 0.0 {
            0
        } else if self.mean <= POISSON_INVERSION_LIMIT {
            self.inversion(rng)
        } else {
            self.transformed_rejection(rng)
        }
    }

    fn inversion(&self, rng: &mut SimRng) -> u64 {
        let cap = (self.mean + 40.0 * self.mean.sqrt() + 100.0) as u64;
        loop {
            let u = rng.uniform();
            let mut k = 0u64;
            let mut p = self.exp_neg_mean;
            let mut cdf = p;
            while u > cdf {
                k += 1;
                p *= self.mean / k as f64;
                cdf += p;
                if k > cap {
                    break;
                }
            }
            // Only reachable when rounding leaves the summed cdf short of u; redraw.
            if k <= cap {
                return k;
            }
        }
    }

    // Hörmann's PTRS.
    fn transformed_rejection(&self, rng: &mut SimRng) -> u64 {
        loop {
            let u = rng.uniform() - 0.5;
            let v = rng.uniform();
            let us = 0.5 - u.abs();
            let k = ((2.0 * self.a / us + self.b) * u + self.mean + 0.43).floor();
            if us >= 0.07 && v <= self.v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + self.inv_alpha.ln() - (self.a / (us * us) + self.b).ln();
            let rhs = -self.mean + k * self.log_mean - ln_factorial(k as u64);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}

/// Poisson conditioned on being at least one.
#[derive(Debug, Clone, Copy)]
pub struct ZeroTruncatedPoisson {
    base: Poisson,
    first_mass: f64,
}

impl ZeroTruncatedPoisson {
    pub fn new(mean: f64) -> Self {
        assert!(mean > 0.0, "zero-truncated Poisson needs a positive mean");
        Self { base: Poisson::new(mean), first_mass: mean * (-mean).exp() / -(-mean).exp_m1() }
    }

    pub fn sample(&self, rng: &mut SimRng) -> u64 {
        let mean = self.base.mean;
        if mean > POISSON_INVERSION_LIMIT {
            loop {
                let k = self.base.sample(rng);
                if k >= 1 {
                    return k;
                }
            }
        }
        let cap = (mean + 40.0 * mean.sqrt() + 100.0) as u64;
        loop {
            let u = rng.uniform();
            let mut k = 1u64;
            let mut p = self.first_mass;
            let mut cdf = p;
            while u > cdf && k <= cap {
                k += 1;
                p *= mean / k as f64;
                cdf += p;
            }
            if k <= cap {
                return k;
            }
        }
    }
}

/// `Binomial(n, p)`: inversion when `n·min(p, 1-p) < 30`, Bernoulli counting otherwise.
pub fn binomial(rng: &mut SimRng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let flipped = p > 0.5;
    let small = if flipped { 1.0 - p } else { p };
    let draws = if (n as f64) * small < 30.0 {
        binomial_inversion(rng, n, small)
    } else {
        (0..n).filter(|_| rng.uniform() < small).count() as u64
    };
    if flipped {
        n - draws
    } else {
        draws
    }
}

fn binomial_inversion(rng: &mut SimRng, n: u64, p: f64) -> u64 {
    let q = 1.0 - p;
    let s = p / q;
    let a = (n + 1) as f64 * s;
    let first = (n as f64 * q.ln()).exp();
    loop {
        let mut u = rng.uniform();
        let mut r = first;
        let mut x = 0u64;
        while u > r {
            u -= r;
            x += 1;
            if x > n {
                break;
            }
            r *= a / x as f64 - s;
        }
        if x <= n {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(samples: impl Iterator<Item = f64>) -> (f64, f64, f64) {
        let data: Vec<f64> = samples.collect();
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let m4 = data.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        (mean, var, ((m4 - var * var) / n).sqrt())
    }

    #[test]
    fn poisson_moments_within_three_standard_errors() {
        let n = 1_000_000;
        for (i, &mean) in [0.1, 1.0, 10.0, 45.0, 300.0].iter().enumerate() {
            let sampler = Poisson::new(mean);
            let mut rng = SimRng::new(7, i as u64);
            let (m, v, v_se) = moments((0..n).map(|_| sampler.sample(&mut rng) as f64));
            let se = (v / n as f64).sqrt();
            assert!((m - mean).abs() <= 3.0 * se, "mean {mean}: got {m}");
            assert!((v - mean).abs() <= 3.0 * v_se, "mean {mean}: variance {v}");
        }
    }

    #[test]
    fn exponential_mean_within_three_standard_errors() {
        let mut rng = SimRng::new(11, 0);
        let rate = 0.25;
        let (m, v, _) = moments((0..1_000_000).map(|_| rng.exponential(rate)));
        assert!((m - 4.0).abs() <= 3.0 * (v / 1e6).sqrt());
    }

    #[test]
    fn binomial_moments() {
        for (i, &(n, p)) in [(10u64, 0.005), (40, 0.5), (200, 0.3), (15, 0.97)].iter().enumerate() {
            let mut rng = SimRng::new(3, i as u64);
            let (m, v, _) = moments((0..200_000).map(|_| binomial(&mut rng, n, p) as f64));
            let expected = n as f64 * p;
            assert!((m - expected).abs() <= 3.0 * (v / 2e5).sqrt() + 1e-12, "n={n} p={p}: {m}");
            assert!((v - expected * (1.0 - p)).abs() <= 0.03 * expected * (1.0 - p) + 1e-9);
        }
        let mut rng = SimRng::new(3, 9);
        assert_eq!(binomial(&mut rng, 5, 0.0), 0);
        assert_eq!(binomial(&mut rng, 5, 1.0), 5);
        assert_eq!(binomial(&mut rng, 0, 0.3), 0);
    }

    #[test]
    fn zero_truncated_poisson_mean() {
        for (i, &mean) in [0.005, 0.5, 40.0].iter().enumerate() {
            let sampler = ZeroTruncatedPoisson::new(mean);
            let mut rng = SimRng::new(5, i as u64);
            let draws: Vec<u64> = (0..200_000).map(|_| sampler.sample(&mut rng)).collect();
            assert!(draws.iter().all(|&k| k >= 1));
            let (m, v, _) = moments(draws.iter().map(|&k| k as f64));
            let expected = mean / -(-mean).exp_m1();
            assert!((m - expected).abs() <= 3.0 * (v / 2e5).sqrt() + 1e-12, "mean {mean}: {m}");
        }
    }

    #[test]
    fn streams_are_reproducible_and_uncorrelated() {
        let mut a = SimRng::new(42, 1);
        let mut b = SimRng::new(42, 1);
        assert!((0..1000).all(|_| a.next_u64() == b.next_u64()));

        let n = 1_000_000;
        let mut x = SimRng::new(42, 1);
        let mut y = SimRng::new(42, 2);
        let xs: Vec<f64> = (0..n).map(|_| x.uniform()).collect();
        let ys: Vec<f64> = (0..n).map(|_| y.uniform()).collect();
        let corr = |u: &[f64], v: &[f64]| {
            let mu = u.iter().sum::<f64>() / u.len() as f64;
            let mv = v.iter().sum::<f64>() / v.len() as f64;
            let cov: f64 = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum();
            let su: f64 = u.iter().map(|a| (a - mu) * (a - mu)).sum();
            let sv: f64 = v.iter().map(|b| (b - mv) * (b - mv)).sum();
            cov / (su * sv).sqrt()
        };
        assert!(corr(&xs, &ys).abs() < 0.01);
        // lag-1 within one stream
        assert!(corr(&xs[..n - 1], &xs[1..]).abs() < 0.01);
    }

    #[test]
    fn uniform_ranges() {
        let mut rng = SimRng::new(0, 0);
        for _ in 0..10_000 {
            let u = rng.uniform();
            let o = rng.uniform_open();
            assert!((0.0..1.0).contains(&u));
            assert!(o > 0.0 && o <= 1.0);
        }
    }
}
