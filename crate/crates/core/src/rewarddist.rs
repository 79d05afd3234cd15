//! Block-win and reward distributions for a single miner.
//!
//! Each epoch the network produces `w ~ Poisson(E)` blocks and the miner wins
//! each one independently with probability `q = p / P`. Per-epoch rewards are
//! multiples of the block reward `M`, so reward distributions live on the
//! lattice `{0, M, 2M, …}` and multi-epoch totals are lattice convolutions.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_positive, ensure_probability, Error, Result};
use crate::specfun::{euler_mascheroni, exp_integral_ei, ln_factorial};

/// Default relative cutoff for the Binomial-over-Poisson series.
pub const DEFAULT_TERM_TOL: f64 = 1e-16;
/// Default probability mass allowed to be dropped from a lattice tail.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Chain-level constants for one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Expected number of blocks per epoch, `E`.
    pub expected_blocks: f64,
    /// Reward per block, `M`.
    pub block_reward: f64,
    /// Total network power `P`.
    pub network_power: f64,
}

impl NetworkParams {
    pub fn new(expected_blocks: f64, block_reward: f64, network_power: f64) -> Result<Self> {
        ensure_positive("expected_blocks", expected_blocks)?;
        ensure_nonnegative("block_reward", block_reward)?;
        ensure_positive("network_power", network_power)?;
        Ok(Self { expected_blocks, block_reward, network_power })
    }
}

/// A miner's power and the per-block win probability it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinerShare {
    pub miner_power: f64,
    pub win_probability: f64,
}

impl MinerShare {
    /// Share of a miner holding `miner_power` out of the network total.
    pub fn new(miner_power: f64, network: &NetworkParams) -> Result<Self> {
        ensure_nonnegative("miner_power", miner_power)?;
        if miner_power > network.network_power {
            return Err(Error::invalid(
                "miner_power",
                format!("{miner_power} exceeds network power {}", network.network_power),
            ));
        }
        Ok(Self { miner_power, win_probability: miner_power / network.network_power })
    }

    /// Share with a given win probability; the power is back-filled as `q·P`.
    pub fn from_probability(win_probability: f64, network: &NetworkParams) -> Result<Self> {
        ensure_probability("win_probability", win_probability)?;
        Ok(Self { miner_power: win_probability * network.network_power, win_probability })
    }
}

/// One epoch of a reward window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochSpec {
    pub network: NetworkParams,
    pub share: MinerShare,
}

impl EpochSpec {
    pub fn new(network: NetworkParams, share: MinerShare) -> Self {
        Self { network, share }
    }

    /// `count` identical epochs.
    pub fn repeated(network: NetworkParams, share: MinerShare, count: usize) -> Vec<Self> {
        vec![Self::new(network, share); count]
    }

    fn win_rate(&self) -> f64 {
        self.network.expected_blocks * self.share.win_probability
    }
}

/// Probability mass function on the lattice `{0, step, 2·step, …}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePmf {
    step: f64,
    masses: Vec<f64>,
    tail_tol: f64,
}

impl LatticePmf {
    /// Validates the lattice contract: positive step, nonnegative masses and
    /// total mass within `[1 - tail_tol, 1]` (up to one part in 1e-14 of rounding).
    pub fn new(step: f64, masses: Vec<f64>, tail_tol: f64) -> Result<Self> {
        ensure_positive("step", step)?;
        ensure_nonnegative("tail_tol", tail_tol)?;
        if masses.is_empty() {
            return Err(Error::invalid("masses", "lattice pmf needs at least one point"));
        }
        if let Some(bad) = masses.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::invalid("masses", format!("mass {bad} is not a probability")));
        }
        let total: f64 = masses.iter().sum();
        if total < 1.0 - tail_tol - 1e-14 || total > 1.0 + 1e-14 {
            return Err(Error::invalid(
                "masses",
                format!("total mass {total} outside [1 - {tail_tol:e}, 1]"),
            ));
        }
        Ok(Self { step, masses, tail_tol })
    }

    /// Unit mass at zero.
    pub fn point_mass_at_zero(step: f64) -> Self {
        Self { step, masses: vec![1.0], tail_tol: 0.0 }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Mass at lattice point `j·step`; zero beyond the stored support.
    pub fn mass(&self, j: usize) -> f64 {
        self.masses.get(j).copied().unwrap_or(0.0)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.masses.iter().enumerate().map(move |(j, &m)| (j as f64 * self.step, m))
    }

    pub fn mean(&self) -> f64 {
        self.points().map(|(x, m)| x * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.points().map(|(x, m)| (x - mean) * (x - mean) * m).sum()
    }

    /// Distribution of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &LatticePmf) -> Result<LatticePmf> {
        if self.step != other.step {
            return Err(Error::UnsupportedLattice { first: self.step, other: other.step });
        }
        let mut out = vec![0.0; self.masses.len() + other.masses.len() - 1];
        for (i, &a) in self.masses.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.masses.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Ok(LatticePmf { step: self.step, masses: out, tail_tol: self.tail_tol + other.tail_tol })
    }

    /// CSV with header `lattice_point,probability`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lattice_point,probability\n");
        for (x, m) in self.points() {
            out.push_str(&format!("{x:.16e},{m:.16e}\n"));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "step": self.step, "masses": self.masses, "tail_tol": self.tail_tol })
    }
}

fn check_count_params(expected_blocks: f64, win_probability: f64) -> Result<()> {
    ensure_positive("expected_blocks", expected_blocks)?;
    ensure_probability("win_probability", win_probability)
}

/// `P(v wins in one epoch) = Σ_{w≥v} Binomial(v; w, q)·Poisson(w; E)`, summed term by term.
///
/// Summation stops once a term drops below `term_tol` times the partial sum
/// and `w` has passed the Poisson bulk `E + 10√E`.
pub fn win_count_pmf_series(v: u64, expected_blocks: f64, win_probability: f64, term_tol: f64) -> Result<f64> {
    check_count_params(expected_blocks, win_probability)?;
    ensure_positive("term_tol", term_tol)?;
    let (e, q) = (expected_blocks, win_probability);
    if q == 0.0 {
        return Ok(if v == 0 { 1.0 } else { 0.0 });
    }
    let vf = v as f64;
    // First term (w = v): C(v, v) q^v (1-q)^0 · e^{-E} E^v / v!.
    let mut log_term = -e + vf * (e * q).ln() - ln_factorial(v);
    if v == 0 {
        log_term = -e;
    }
    if q == 1.0 {
        return Ok(log_term.exp());
    }
    // term(w+1)/term(w) = (w+1)/(w+1-v) · (1-q) · E/(w+1) = E(1-q)/(w+1-v)
    let log_ratio_base = (e * (1.0 - q)).ln();
    let bulk = e + 10.0 * e.sqrt();
    let mut sum = 0.0;
    let mut w = v;
    loop {
        let term = log_term.exp();
        sum += term;
        if term < term_tol * sum && w as f64 > bulk {
            break;
        }
        if w > v + 100_000 + (100.0 * bulk) as u64 {
            break;
        }
        w += 1;
        log_term += log_ratio_base - ((w - v) as f64).ln();
    }
    Ok(sum.min(1.0))
}

/// Poisson-thinned closed form `e^{-Eq}(Eq)^v / v!`.
pub fn win_count_pmf_closed(v: u64, expected_blocks: f64, win_probability: f64) -> Result<f64> {
    check_count_params(expected_blocks, win_probability)?;
    Ok(poisson_pmf(v, expected_blocks * win_probability))
}

pub(crate) fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-mean).exp();
    }
    (-mean + k as f64 * mean.ln() - ln_factorial(k)).exp()
}

fn poisson_lattice(mean: f64, step: f64, tail_tol: f64) -> LatticePmf {
    if mean == 0.0 {
        return LatticePmf::point_mass_at_zero(step);
    }
    let mut masses = Vec::new();
    let mut cumulative = 0.0;
    let cap = (mean + 40.0 * mean.sqrt() + 200.0) as u64;
    for k in 0..=cap {
        let m = poisson_pmf(k, mean);
        masses.push(m);
        cumulative += m;
        if cumulative >= 1.0 - tail_tol && k as f64 >= mean {
            break;
        }
    }
    if cumulative > 1.0 {
        masses.iter_mut().for_each(|m| *m /= cumulative);
    }
    LatticePmf { step, masses, tail_tol }
}

/// Reward distribution of one epoch on the lattice of step `M`.
///
/// `M = 0` yields a unit mass at zero (on a unit step, since the lattice needs a positive step).
pub fn epoch_reward_pmf(network: &NetworkParams, share: &MinerShare, tail_tol: f64) -> Result<LatticePmf> {
    check_count_params(network.expected_blocks, share.win_probability)?;
    ensure_positive("tail_tol", tail_tol)?;
    if network.block_reward == 0.0 {
        return Ok(LatticePmf::point_mass_at_zero(1.0));
    }
    Ok(poisson_lattice(
        network.expected_blocks * share.win_probability,
        network.block_reward,
        tail_tol,
    ))
}

/// Distribution of the total reward over a window of independent epochs.
///
/// Every epoch must pay the same block reward. Each factor is truncated at
/// `tail_tol / (2n)` and the convolved tail is trimmed by at most `tail_tol / 2`,
/// so the result keeps at least `1 - tail_tol` of the mass.
pub fn total_reward_pmf(epochs: &[EpochSpec], tail_tol: f64) -> Result<LatticePmf> {
    let first = epochs.first().ok_or_else(|| Error::invalid("epochs", "window must be nonempty"))?;
    ensure_positive("tail_tol", tail_tol)?;
    let reward = first.network.block_reward;
    if let Some(other) = epochs.iter().find(|e| e.network.block_reward != reward) {
        return Err(Error::UnsupportedLattice { first: reward, other: other.network.block_reward });
    }
    if epochs.len() == 1 {
        return epoch_reward_pmf(&first.network, &first.share, tail_tol);
    }
    let factor_tol = tail_tol / (2.0 * epochs.len() as f64);
    let mut total = epoch_reward_pmf(&first.network, &first.share, factor_tol)?;
    for epoch in &epochs[1..] {
        total = total.convolve(&epoch_reward_pmf(&epoch.network, &epoch.share, factor_tol)?)?;
    }
    let mut dropped = 0.0;
    while total.masses.len() > 1 {
        let last = *total.masses.last().expect("nonempty");
        if dropped + last > 0.5 * tail_tol {
            break;
        }
        dropped += last;
        total.masses.pop();
    }
    total.tail_tol = tail_tol;
    Ok(total)
}

fn ensure_window(epochs: &[EpochSpec]) -> Result<()> {
    if epochs.is_empty() {
        Err(Error::invalid("epochs", "window must be nonempty"))
    } else {
        Ok(())
    }
}

/// Expected total reward `Σ_k E·M_k·q_k`.
pub fn expected_total_reward(epochs: &[EpochSpec]) -> Result<f64> {
    ensure_window(epochs)?;
    Ok(epochs.iter().map(|e| e.win_rate() * e.network.block_reward).sum())
}

/// Closed-form variance with the exponential-integral correction, evaluated as printed:
/// `Σ_m e^{-E} E² M_m² [1 + q_m(1 - q_m)(Ei(E) - ln E - Γ)]`.
///
/// This does not agree with the Poisson-thinning variance (it stays positive
/// as `q → 0`); it is reported next to [`variance_thinned`] for comparison.
pub fn variance_paper(epochs: &[EpochSpec]) -> Result<f64> {
    ensure_window(epochs)?;
    let mut total = 0.0;
    for epoch in epochs {
        let e = epoch.network.expected_blocks;
        ensure_positive("expected_blocks", e)?;
        let m = epoch.network.block_reward;
        let q = epoch.share.win_probability;
        let bracket = exp_integral_ei(e)? - e.ln() - euler_mascheroni();
        total += (-e).exp() * e * e * m * m * (1.0 + q * (1.0 - q) * bracket);
    }
    Ok(total)
}

/// Variance under Poisson thinning: `Σ_k M_k²·E·q_k`.
pub fn variance_thinned(epochs: &[EpochSpec]) -> Result<f64> {
    ensure_window(epochs)?;
    Ok(epochs
        .iter()
        .map(|e| e.network.block_reward * e.network.block_reward * e.win_rate())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(e: f64, m: f64) -> NetworkParams {
        NetworkParams::new(e, m, 1.0).unwrap()
    }

    fn share(q: f64, n: &NetworkParams) -> MinerShare {
        MinerShare::from_probability(q, n).unwrap()
    }

    #[test]
    fn zero_power_never_wins() {
        assert_eq!(win_count_pmf_series(0, 3.0, 0.0, 1e-16).unwrap(), 1.0);
        assert_eq!(win_count_pmf_series(2, 3.0, 0.0, 1e-16).unwrap(), 0.0);
        assert_eq!(win_count_pmf_closed(0, 3.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn series_spot_values() {
        let p0 = win_count_pmf_series(0, 0.1, 0.001, 1e-16).unwrap();
        assert!((p0 - 0.9999000049998333).abs() < 1e-15);
        let p2 = win_count_pmf_series(2, 10.0, 0.005, 1e-16).unwrap();
        assert!((p2 - 0.0011890367806258926).abs() < 1e-15);
        assert_eq!(win_count_pmf_closed(0, 0.1, 0.001).unwrap(), (-0.0001f64).exp());
    }

    #[test]
    fn series_matches_brute_force_binomial_sum() {
        // Direct Σ_w C(w,v) q^v (1-q)^{w-v} e^{-E} E^w / w! with explicit binomials.
        fn brute(v: u64, e: f64, q: f64) -> f64 {
            let mut total = 0.0;
            for w in v..200 {
                let mut binom = 1.0;
                for i in 0..v {
                    binom *= (w - i) as f64 / (i + 1) as f64;
                }
                let mut pois = (-e).exp();
                for i in 1..=w {
                    pois *= e / i as f64;
                }
                total += binom * q.powi(v as i32) * (1.0 - q).powi((w - v) as i32) * pois;
            }
            total
        }
        for &(v, e, q) in &[(0, 1.0, 0.3), (1, 10.0, 0.05), (3, 10.0, 0.5), (5, 20.0, 0.2)] {
            let got = win_count_pmf_series(v, e, q, 1e-16).unwrap();
            assert!((got - brute(v, e, q)).abs() < 1e-14, "v={v} E={e} q={q}");
        }
    }

    #[test]
    fn series_does_not_truncate_early_for_large_mean() {
        let got = win_count_pmf_series(40, 200.0, 0.2, 1e-16).unwrap();
        let closed = win_count_pmf_closed(40, 200.0, 0.2).unwrap();
        assert!((got - closed).abs() < 1e-12 * closed.max(1e-3));
    }

    #[test]
    fn certain_winner_takes_every_block() {
        let got = win_count_pmf_series(3, 2.0, 1.0, 1e-16).unwrap();
        assert!((got - (-2.0f64).exp() * 8.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn epoch_pmf_spot_masses() {
        let n = net(10.0, 2.0);
        let pmf = epoch_reward_pmf(&n, &share(0.005, &n), 1e-12).unwrap();
        assert_eq!(pmf.step(), 2.0);
        assert!((pmf.mass(0) - (-0.05f64).exp()).abs() < 1e-16);
        assert!((pmf.mass(1) - 0.05 * (-0.05f64).exp()).abs() < 1e-16);
        let total = pmf.total_mass();
        assert!(total >= 1.0 - 1e-12 && total <= 1.0);
    }

    #[test]
    fn degenerate_epoch_pmfs() {
        let n = net(10.0, 2.0);
        let pmf = epoch_reward_pmf(&n, &share(0.0, &n), 1e-12).unwrap();
        assert_eq!(pmf.masses(), &[1.0]);
        let zero_reward = net(10.0, 0.0);
        let pmf = epoch_reward_pmf(&zero_reward, &share(0.3, &zero_reward), 1e-12).unwrap();
        assert_eq!(pmf.masses(), &[1.0]);
        assert_eq!(pmf.mean(), 0.0);
    }

    #[test]
    fn single_epoch_total_equals_epoch_pmf() {
        let n = net(1.0, 3.0);
        let s = share(0.2, &n);
        let total = total_reward_pmf(&[EpochSpec::new(n, s)], 1e-12).unwrap();
        assert_eq!(total, epoch_reward_pmf(&n, &s, 1e-12).unwrap());
    }

    #[test]
    fn three_epochs_sum_to_poisson() {
        let n = net(10.0, 1.0);
        let s = share(0.001, &n);
        let total = total_reward_pmf(&EpochSpec::repeated(n, s, 3), 1e-12).unwrap();
        let mut l1 = 0.0;
        for j in 0..total.masses().len() {
            let diff = (total.mass(j) - poisson_pmf(j as u64, 0.03)).abs();
            if j <= 4 {
                assert!(diff < 1e-15, "j={j}");
            }
            l1 += diff;
        }
        assert!(l1 <= 1e-12);
        let mass = total.total_mass();
        assert!(mass >= 1.0 - 1e-12 && mass <= 1.0 + 1e-15);
    }

    #[test]
    fn heterogeneous_reward_is_rejected() {
        let a = net(1.0, 1.0);
        let b = net(1.0, 2.0);
        let epochs = [EpochSpec::new(a, share(0.1, &a)), EpochSpec::new(b, share(0.1, &b))];
        assert!(matches!(
            total_reward_pmf(&epochs, 1e-12),
            Err(Error::UnsupportedLattice { .. })
        ));
        assert!(total_reward_pmf(&[], 1e-12).is_err());
    }

    #[test]
    fn moments_of_total_match_closed_forms() {
        let n = net(10.0, 1.0);
        let s = share(0.005, &n);
        let epochs = EpochSpec::repeated(n, s, 100);
        let total = total_reward_pmf(&epochs, 1e-12).unwrap();
        let mean = expected_total_reward(&epochs).unwrap();
        let var = variance_thinned(&epochs).unwrap();
        assert!((total.mean() - mean).abs() <= 1e-9 * mean);
        assert!((total.variance() - var).abs() <= 1e-9 * var);
    }

    #[test]
    fn expected_reward_spot_values() {
        let n = net(0.1, 6.25);
        let e = [EpochSpec::new(n, share(0.01, &n))];
        assert!((expected_total_reward(&e).unwrap() - 0.00625).abs() < 1e-18);
        let zero = [EpochSpec::new(n, share(0.0, &n))];
        assert_eq!(expected_total_reward(&zero).unwrap(), 0.0);
        assert_eq!(variance_thinned(&zero).unwrap(), 0.0);
    }

    #[test]
    fn variance_values() {
        let n = net(10.0, 1.0);
        let e = [EpochSpec::new(n, share(0.001, &n))];
        assert!((variance_thinned(&e).unwrap() - 0.01).abs() < 1e-17);

        let n = net(1.0, 1.0);
        let e = [EpochSpec::new(n, share(0.5, &n))];
        let expected = (-1.0f64).exp() * (1.0 + 0.25 * (1.8951178163559368 - 0.5772156649015329));
        assert!((variance_paper(&e).unwrap() - expected).abs() < 1e-15);
        assert!((variance_paper(&e).unwrap() - 0.48908671792036423).abs() < 1e-15);

        let n = net(3.0, 2.0);
        let e = [EpochSpec::new(n, share(0.0, &n))];
        assert!((variance_paper(&e).unwrap() - (-3.0f64).exp() * 9.0 * 4.0).abs() < 1e-14);
    }

    #[test]
    fn lattice_serializations() {
        let pmf = LatticePmf::new(0.5, vec![0.25, 0.75], 0.0).unwrap();
        assert_eq!(
            pmf.to_csv(),
            "lattice_point,probability\n0.0000000000000000e0,2.5000000000000000e-1\n5.0000000000000000e-1,7.5000000000000000e-1\n"
        );
        let json = pmf.to_json();
        assert_eq!(json["step"], 0.5);
        assert_eq!(json["masses"][1], 0.75);
        assert!(LatticePmf::new(0.5, vec![0.25, 0.25], 1e-12).is_err());
        assert!(LatticePmf::new(0.0, vec![1.0], 0.0).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn expected_reward_monotone(q in 0.0f64..0.5, dq in 0.0f64..0.5, m in 0.0f64..10.0, dm in 0.0f64..10.0) {
                let base = net(2.0, m);
                let higher = net(2.0, m + dm);
                let r0 = expected_total_reward(&[EpochSpec::new(base, share(q, &base))]).unwrap();
                let r1 = expected_total_reward(&[EpochSpec::new(base, share(q + dq, &base))]).unwrap();
                let r2 = expected_total_reward(&[EpochSpec::new(higher, share(q, &higher))]).unwrap();
                prop_assert!(r1 >= r0 && r2 >= r0);
            }

            #[test]
            fn epoch_pmf_is_normalized(e in 0.01f64..50.0, q in 0.0f64..1.0, tol in 1e-14f64..1e-6) {
                let n = net(e, 1.5);
                let pmf = epoch_reward_pmf(&n, &share(q, &n), tol).unwrap();
                let total = pmf.total_mass();
                prop_assert!(pmf.masses().iter().all(|m| *m >= 0.0));
                prop_assert!(total >= 1.0 - tol && total <= 1.0 + 1e-15);
            }
        }
    }
}
