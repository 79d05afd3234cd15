//! Time-average (non-ergodic) growth rates of a miner's wealth.
//!
//! A miner with wealth `W` spends `γW` on equipment (`γWc_e` units of power)
//! and keeps `(1-γ)W` to pay a running cost of `γWc_ec_r` per epoch. Under
//! stochastic rewards, the growth rate `g` averages the log-wealth ratio over
//! the exponential waiting time to the first win, with a `log γ` payoff when
//! the reserve runs out first. Under smooth rewards, the miner is paid its
//! share every period `τ` and the growth rate has a closed form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_positive, ensure_probability, Error, Result};
use crate::numerics::{adaptive_simpson, golden_section_max};
use crate::rewarddist::{poisson_pmf, NetworkParams};

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
pub const DEFAULT_GRID_SIZE: usize = 1024;
pub const DEFAULT_REFINE_TOL: f64 = 1e-9;
/// Distance of the split grid from the singular endpoints 0 and 1.
pub const SPLIT_EPSILON: f64 = 1e-6;
/// Bracket expansions attempted by [`expand_wealth_bracket`].
pub const MAX_BRACKET_DOUBLINGS: u32 = 60;

/// One outcome of a finite game: probability, cost paid and reward received.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameRound {
    pub probability: f64,
    pub cost: f64,
    pub reward: f64,
}

impl GameRound {
    pub fn new(probability: f64, cost: f64, reward: f64) -> Self {
        Self { probability, cost, reward }
    }
}

fn check_rounds(rounds: &[GameRound], initial_wealth: f64) -> Result<()> {
    ensure_positive("initial_wealth", initial_wealth)?;
    if rounds.is_empty() {
        return Err(Error::invalid("rounds", "game needs at least one outcome"));
    }
    let mut total = 0.0;
    for r in rounds {
        ensure_probability("probability", r.probability)?;
        total += r.probability;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("rounds", format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// `g = Σ q_k log((W0 - c_k + M_k) / W0)`.
pub fn tane_growth_rate(rounds: &[GameRound], initial_wealth: f64) -> Result<f64> {
    check_rounds(rounds, initial_wealth)?;
    let mut g = 0.0;
    for r in rounds.iter().filter(|r| r.probability > 0.0) {
        let ratio = (initial_wealth - r.cost + r.reward) / initial_wealth;
        if !(ratio > 0.0) {
            return Err(Error::CertainRuin(format!(
                "outcome with probability {} leaves wealth ratio {ratio}",
                r.probability
            )));
        }
        g += r.probability * ratio.ln();
    }
    Ok(g)
}

/// Jensen upper bound `log(1 + E_q[M - c] / W0)` on [`tane_growth_rate`].
pub fn tane_growth_upper_bound(rounds: &[GameRound], initial_wealth: f64) -> Result<f64> {
    check_rounds(rounds, initial_wealth)?;
    let net: f64 = rounds.iter().map(|r| r.probability * (r.reward - r.cost)).sum();
    let arg = 1.0 + net / initial_wealth;
    if !(arg > 0.0) {
        return Err(Error::Domain(format!("expected wealth ratio {arg} is not positive")));
    }
    Ok((net / initial_wealth).ln_1p())
}

/// Time-averaged wealth `W0·e^{g t}`.
pub fn wealth_trajectory(initial_wealth: f64, growth_rate: f64, t: f64) -> Result<f64> {
    ensure_positive("initial_wealth", initial_wealth)?;
    ensure_nonnegative("t", t)?;
    Ok(initial_wealth * (growth_rate * t).exp())
}

/// Linear equipment economics: power bought per unit currency and cost per unit power per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub equipment_rate: f64,
    pub running_rate: f64,
}

impl CostModel {
    pub fn new(equipment_rate: f64, running_rate: f64) -> Result<Self> {
        ensure_positive("equipment_rate", equipment_rate)?;
        ensure_positive("running_rate", running_rate)?;
        Ok(Self { equipment_rate, running_rate })
    }
}

/// A miner's budget split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinerPlan {
    pub wealth: f64,
    /// Fraction `γ` of wealth spent on equipment.
    pub split: f64,
    pub equipment_rate: f64,
    pub running_rate: f64,
}

impl MinerPlan {
    pub fn new(wealth: f64, split: f64, costs: CostModel) -> Result<Self> {
        ensure_positive("wealth", wealth)?;
        if !(split > 0.0 && split < 1.0) {
            return Err(Error::invalid("split", format!("must lie in (0, 1), got {split}")));
        }
        let costs = CostModel::new(costs.equipment_rate, costs.running_rate)?;
        Ok(Self {
            wealth,
            split,
            equipment_rate: costs.equipment_rate,
            running_rate: costs.running_rate,
        })
    }

    pub fn costs(&self) -> CostModel {
        CostModel { equipment_rate: self.equipment_rate, running_rate: self.running_rate }
    }

    /// `γWc_e`.
    pub fn purchased_power(&self) -> f64 {
        self.split * self.wealth * self.equipment_rate
    }

    /// `γWc_ec_r` per epoch.
    pub fn running_cost(&self) -> f64 {
        self.purchased_power() * self.running_rate
    }

    /// `(1-γ)W`.
    pub fn reserve(&self) -> f64 {
        (1.0 - self.split) * self.wealth
    }

    /// Per-block win probability once the miner's power joins a network of baseline power `P0`.
    pub fn win_probability(&self, network: &NetworkParams) -> f64 {
        let p = self.purchased_power();
        p / (network.network_power + p)
    }
}

/// Epochs the reserve lasts without any win, `(1-γ)/(γc_ec_r)`.
pub fn t_max(plan: &MinerPlan) -> f64 {
    (1.0 - plan.split) / (plan.split * plan.equipment_rate * plan.running_rate)
}

/// Win rate `λ = E·γWc_e/(P0 + γWc_e)`.
pub fn win_rate_lambda(plan: &MinerPlan, network: &NetworkParams) -> f64 {
    network.expected_blocks * plan.win_probability(network)
}

/// Expected reward given at least one win, `M·q / (1 - e^{-Eq})`.
pub fn conditional_reward(plan: &MinerPlan, network: &NetworkParams) -> Result<f64> {
    conditional_reward_for(network.block_reward, network.expected_blocks, plan.win_probability(network))
}

pub fn conditional_reward_for(block_reward: f64, expected_blocks: f64, win_probability: f64) -> Result<f64> {
    if !(win_probability > 0.0) {
        return Err(Error::Degenerate("reward conditioned on a win is undefined when q = 0".into()));
    }
    let denominator = -(-expected_blocks * win_probability).exp_m1();
    Ok(block_reward * win_probability / denominator)
}

/// [`conditional_reward_for`] with the win probability `1 - Σ_w Poisson(w; E)(1-q)^w`
/// summed term by term as `Σ_w Poisson(w; E)(1 - (1-q)^w)`.
pub fn conditional_reward_series(block_reward: f64, expected_blocks: f64, win_probability: f64) -> Result<f64> {
    if !(win_probability > 0.0) {
        return Err(Error::Degenerate("reward conditioned on a win is undefined when q = 0".into()));
    }
    let log_miss = (-win_probability).ln_1p();
    let bulk = expected_blocks + 10.0 * expected_blocks.sqrt();
    let mut denominator = 0.0;
    for w in 1u64.. {
        let term = poisson_pmf(w, expected_blocks) * -(w as f64 * log_miss).exp_m1();
        denominator += term;
        if (term < 1e-16 * denominator && w as f64 > bulk) || w > 1_000_000 {
            break;
        }
    }
    Ok(block_reward * win_probability / denominator)
}

/// The growth rate under stochastic rewards and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBreakdown {
    pub g: f64,
    pub split: f64,
    pub rate: f64,
    pub win_probability: f64,
    pub t_max: f64,
    /// `∫_0^{t_max} λe^{-λt} log(1 - tγc_ec_r + R/W) dt`.
    pub win_term: f64,
    /// `log(γ)·e^{-λ t_max}`.
    pub bankrupt_term: f64,
    pub conditional_reward: f64,
    /// Quadrature error estimate carried through to `g`.
    pub quadrature_error: f64,
}

/// Growth rate of a stochastically rewarded miner:
///
/// ```text
/// g = λ [ ∫_0^{t_max} λ e^{-λt} log((W - tγWc_rc_e + R)/W) dt + log(γ) e^{-λ t_max} ]
/// ```
///
/// with `R` the reward expected given a win. On `[0, t_max]` the log argument
/// is at least `γ + R/W`, so the integrand is finite.
pub fn stochastic_growth_rate(plan: &MinerPlan, network: &NetworkParams, quad_tol: f64) -> Result<GrowthBreakdown> {
    ensure_positive("quad_tol", quad_tol)?;
    let q = plan.win_probability(network);
    let rate = network.expected_blocks * q;
    let horizon = t_max(plan);
    let reward = conditional_reward_for(network.block_reward, network.expected_blocks, q)?;
    let reward_ratio = reward / plan.wealth;
    let burn = plan.split * plan.running_rate * plan.equipment_rate;
    let floor = plan.split * (1.0 - 1e-9);

    let mut below_floor = false;
    let integrand = |t: f64| {
        let shift = reward_ratio - t * burn;
        if 1.0 + shift - reward_ratio < floor {
            below_floor = true;
        }
        rate * (-rate * t).exp() * shift.ln_1p()
    };
    // Past λt = 745 the factor e^{-λt} is zero in double precision.
    let upper = if rate > 0.0 { horizon.min(745.0 / rate) } else { horizon };
    let quad = adaptive_simpson(integrand, 0.0, upper, quad_tol, f64::MIN_POSITIVE)?;
    if below_floor {
        return Err(Error::Domain("log argument fell below the split on [0, t_max]".into()));
    }
    let bankrupt_term = plan.split.ln() * (-rate * horizon).exp();
    Ok(GrowthBreakdown {
        g: rate * (quad.value + bankrupt_term),
        split: plan.split,
        rate,
        win_probability: q,
        t_max: horizon,
        win_term: quad.value,
        bankrupt_term,
        conditional_reward: reward,
        quadrature_error: rate * quad.error_estimate,
    })
}

/// Optimal split with smooth rewards, `1/(1 + τc_ec_r)`.
pub fn smooth_optimal_gamma(period: f64, costs: CostModel) -> Result<f64> {
    ensure_positive("period", period)?;
    let costs = CostModel::new(costs.equipment_rate, costs.running_rate)?;
    Ok(1.0 / (1.0 + period * costs.equipment_rate * costs.running_rate))
}

/// Reserve fraction `1 - γ*` at the smooth optimum, `τc_ec_r/(1 + τc_ec_r)`.
///
/// Computed directly: subtracting `γ*` from one loses `log10(1/(τc_ec_r))` digits when `γ*` is near one.
pub fn smooth_optimal_reserve(period: f64, costs: CostModel) -> Result<f64> {
    ensure_positive("period", period)?;
    let costs = CostModel::new(costs.equipment_rate, costs.running_rate)?;
    let k = period * costs.equipment_rate * costs.running_rate;
    Ok(k / (1.0 + k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothGrowth {
    /// Closed-form value.
    pub g: f64,
    /// Same quantity by adaptive quadrature.
    pub g_quadrature: f64,
    pub split: f64,
    /// Reward paid each period, `M·γWc_e/(P0 + γWc_e)`.
    pub period_reward: f64,
}

/// `ln(1+r)/r - 1`, stable as `r → 0`.
fn log1p_ratio_minus_one(r: f64) -> f64 {
    if r.abs() < 1e-3 {
        let mut sum = 0.0;
        let mut power = 1.0;
        for k in 1..=12 {
            power *= -r;
            sum += power / (k as f64 + 1.0);
        }
        sum
    } else {
        r.ln_1p() / r - 1.0
    }
}

/// Growth rate under smooth rewards,
/// `(1/τ)∫_0^τ log(1 + γ(M c_e/(P0+γWc_e) - t c_e c_r)) dt`.
///
/// Evaluated in closed form and by quadrature; the two must agree to 1e-10
/// relative (measured against `max(|g|, 1e-6 · mean |integrand|)`).
pub fn smooth_growth(plan: &MinerPlan, network: &NetworkParams, period: f64, quad_tol: f64) -> Result<SmoothGrowth> {
    ensure_positive("period", period)?;
    ensure_positive("quad_tol", quad_tol)?;
    let gamma = plan.split;
    let gain = gamma * network.block_reward * plan.equipment_rate / (network.network_power + plan.purchased_power());
    let burn = gamma * plan.equipment_rate * plan.running_rate;
    let end = gain - burn * period;
    if !(end > -1.0) {
        return Err(Error::CertainRuin(format!(
            "smooth-reward wealth ratio {} is not positive at t = τ",
            1.0 + end
        )));
    }
    // avg over [0, τ] of ln(a - bt) = ln a + h(bτ / (a - bτ)), h(r) = ln(1+r)/r - 1
    let closed = gain.ln_1p() + log1p_ratio_minus_one(burn * period / (1.0 + end));

    let quad = adaptive_simpson(
        |t| (gain - burn * t).ln_1p(),
        0.0,
        period,
        quad_tol.min(1e-13),
        f64::MIN_POSITIVE,
    )?;
    let by_quadrature = quad.value / period;
    let mean_abs = gain.ln_1p().abs().max(end.ln_1p().abs());
    let scale = closed.abs().max(1e-6 * mean_abs);
    let gap = (by_quadrature - closed).abs();
    if gap > 1e-10 * scale {
        return Err(Error::Convergence {
            what: "smooth growth quadrature disagrees with the closed form".into(),
            estimate: by_quadrature,
            achieved_error: gap,
        });
    }
    Ok(SmoothGrowth {
        g: closed,
        g_quadrature: by_quadrature,
        split: gamma,
        period_reward: network.block_reward * plan.win_probability(network),
    })
}

pub fn smooth_growth_rate(plan: &MinerPlan, network: &NetworkParams, period: f64) -> Result<f64> {
    Ok(smooth_growth(plan, network, period, DEFAULT_QUAD_TOL)?.g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub grid_size: usize,
    pub refine_tol: f64,
    pub quad_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { grid_size: DEFAULT_GRID_SIZE, refine_tol: DEFAULT_REFINE_TOL, quad_tol: DEFAULT_QUAD_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub gamma: f64,
    pub g: f64,
    /// Central second difference of `g` at `gamma`; absent when `gamma` sits on the grid boundary.
    pub second_derivative: Option<f64>,
    /// Second-difference magnitude attributable to quadrature error.
    pub curvature_noise: f64,
    pub breakdown: GrowthBreakdown,
}

impl Optimum {
    /// Whether the curvature check confirms a local maximum.
    pub fn is_local_max(&self) -> bool {
        self.second_derivative.is_some_and(|d2| d2 <= self.curvature_noise)
    }
}

/// Uniform split grid on `(ε, 1-ε)`.
pub fn split_grid(grid_size: usize) -> Vec<f64> {
    let span = 1.0 - 2.0 * SPLIT_EPSILON;
    (0..grid_size)
        .map(|i| SPLIT_EPSILON + span * i as f64 / (grid_size - 1) as f64)
        .collect()
}

fn growth_at(wealth: f64, costs: CostModel, network: &NetworkParams, gamma: f64, quad_tol: f64) -> f64 {
    MinerPlan::new(wealth, gamma, costs)
        .and_then(|plan| stochastic_growth_rate(&plan, network, quad_tol))
        .map(|b| b.g)
        .unwrap_or(f64::NEG_INFINITY)
}

/// Maximizes the stochastic growth rate over the split `γ`.
///
/// Scans a uniform grid on `(ε, 1-ε)` in parallel, then refines the best
/// grid cell by golden-section search. The result is bit-reproducible.
pub fn optimize_gamma(wealth: f64, costs: CostModel, network: &NetworkParams, config: &OptimizerConfig) -> Result<Optimum> {
    ensure_positive("wealth", wealth)?;
    ensure_positive("refine_tol", config.refine_tol)?;
    if config.grid_size < 3 {
        return Err(Error::invalid("grid_size", "need at least 3 grid points"));
    }
    let grid = split_grid(config.grid_size);
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&gamma| growth_at(wealth, costs, network, gamma, config.quad_tol))
        .collect();

    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    if !values[best].is_finite() {
        return Err(Error::NoViableStrategy(format!(
            "growth rate is -inf at every split for wealth {wealth}"
        )));
    }

    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (refined, refined_g) = golden_section_max(
        |gamma| growth_at(wealth, costs, network, gamma, config.quad_tol),
        lo,
        hi,
        config.refine_tol,
    );
    let gamma = if refined_g >= values[best] { refined } else { grid[best] };

    let plan = MinerPlan::new(wealth, gamma, costs)?;
    let breakdown = stochastic_growth_rate(&plan, network, config.quad_tol)?;

    let h = 1e-3f64.min(gamma - SPLIT_EPSILON).min(1.0 - SPLIT_EPSILON - gamma);
    let (second_derivative, curvature_noise) = if h >= 1e-5 {
        let below = stochastic_growth_rate(&MinerPlan::new(wealth, gamma - h, costs)?, network, config.quad_tol)?;
        let above = stochastic_growth_rate(&MinerPlan::new(wealth, gamma + h, costs)?, network, config.quad_tol)?;
        let d2 = (above.g - 2.0 * breakdown.g + below.g) / (h * h);
        let err = above.quadrature_error + 2.0 * breakdown.quadrature_error + below.quadrature_error;
        let scale = above.g.abs().max(breakdown.g.abs()).max(below.g.abs());
        (Some(d2), 4.0 * (err + config.quad_tol * scale) / (h * h))
    } else {
        (None, 0.0)
    };

    Ok(Optimum { gamma, g: breakdown.g, second_derivative, curvature_noise, breakdown })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViableWealth {
    pub wealth: f64,
    pub optimum: Optimum,
    pub iterations: u32,
}

/// Grows a bracket `(lo, hi)` with `g*(lo) < 0 < g*(hi)` geometrically from `start`.
pub fn expand_wealth_bracket(start: f64, costs: CostModel, network: &NetworkParams, config: &OptimizerConfig) -> Result<(f64, f64)> {
    ensure_positive("start", start)?;
    let g_star = |w: f64| optimize_gamma(w, costs, network, config).map(|o| o.g);
    if g_star(start)? > 0.0 {
        let mut lo = start;
        for _ in 0..MAX_BRACKET_DOUBLINGS {
            let hi = lo;
            lo *= 0.5;
            if g_star(lo)? < 0.0 {
                return Ok((lo, hi));
            }
        }
        Err(Error::NoRoot(format!(
            "mining stays profitable down to wealth {lo} after {MAX_BRACKET_DOUBLINGS} halvings"
        )))
    } else {
        let mut hi = start;
        for _ in 0..MAX_BRACKET_DOUBLINGS {
            let lo = hi;
            hi *= 2.0;
            if g_star(hi)? > 0.0 {
                return Ok((lo, hi));
            }
        }
        Err(Error::NoRoot(format!(
            "mining is unprofitable up to wealth {hi} after {MAX_BRACKET_DOUBLINGS} doublings"
        )))
    }
}

/// Smallest wealth at which optimized stochastic mining breaks even, `g*(W_min) = 0`.
///
/// Bisects inside `bracket`, which must satisfy `g*(lo) < 0 < g*(hi)`, until
/// the bracket is narrower than 1e-6 relative and `|g*| ≤ 1e-8`.
pub fn min_viable_wealth(costs: CostModel, network: &NetworkParams, bracket: (f64, f64), config: &OptimizerConfig) -> Result<ViableWealth> {
    let (mut lo, mut hi) = bracket;
    ensure_positive("bracket.lo", lo)?;
    ensure_positive("bracket.hi", hi)?;
    let g_star = |w: f64| optimize_gamma(w, costs, network, config);
    let mut at_lo = g_star(lo)?;
    let mut at_hi = g_star(hi)?;
    if !(at_lo.g < 0.0 && at_hi.g > 0.0) {
        return Err(Error::NoRoot(format!(
            "bracket [{lo}, {hi}] does not straddle a sign change (g* = {}, {})",
            at_lo.g, at_hi.g
        )));
    }
    let mut iterations = 0;
    loop {
        let best = if at_lo.g.abs() <= at_hi.g.abs() { (lo, at_lo) } else { (hi, at_hi) };
        let narrow = hi - lo <= 1e-6 * hi;
        if narrow && best.1.g.abs() <= 1e-8 {
            return Ok(ViableWealth { wealth: best.0, optimum: best.1, iterations });
        }
        let mid = 0.5 * (lo + hi);
        if iterations >= 200 || mid <= lo || mid >= hi {
            return Err(Error::Convergence {
                what: "minimum viable wealth bisection".into(),
                estimate: best.0,
                achieved_error: best.1.g.abs(),
            });
        }
        let at_mid = g_star(mid)?;
        iterations += 1;
        if at_mid.g == 0.0 {
            return Ok(ViableWealth { wealth: mid, optimum: at_mid, iterations });
        }
        if at_mid.g < 0.0 {
            lo = mid;
            at_lo = at_mid;
        } else {
            hi = mid;
            at_hi = at_mid;
        }
    }
}

/// Upper bounds on the continuous fee rate a pool may charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeBound {
    /// `g_smooth - g*`: the pool beats solo mining below this rate.
    pub relative_bound: f64,
    /// `g_smooth`: pool mining stays profitable below this rate.
    pub profitability_bound: f64,
    pub g_smooth: f64,
    pub g_star: f64,
    pub smooth_split: f64,
    pub stochastic_split: f64,
}

impl FeeBound {
    pub fn is_acceptable(&self, fee: f64) -> bool {
        fee < self.relative_bound && (self.g_star >= 0.0 || fee < self.profitability_bound)
    }
}

/// Compares optimal smooth mining against optimal solo mining.
pub fn max_pool_fee(wealth: f64, costs: CostModel, network: &NetworkParams, period: f64, config: &OptimizerConfig) -> Result<FeeBound> {
    let smooth_split = smooth_optimal_gamma(period, costs)?;
    let smooth_plan = MinerPlan::new(wealth, smooth_split, costs)?;
    let smooth = smooth_growth(&smooth_plan, network, period, config.quad_tol)?;
    let solo = optimize_gamma(wealth, costs, network, config)?;
    Ok(FeeBound {
        relative_bound: smooth.g - solo.g,
        profitability_bound: smooth.g,
        g_smooth: smooth.g,
        g_star: solo.g,
        smooth_split,
        stochastic_split: solo.gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> (MinerPlan, NetworkParams) {
        let network = NetworkParams::new(10.0, 1.0, 1000.0).unwrap();
        let plan = MinerPlan::new(100.0, 0.5, CostModel::new(1.0, 0.001).unwrap()).unwrap();
        (plan, network)
    }

    #[test]
    fn fair_game_has_zero_growth() {
        let rounds = [GameRound::new(0.3, 2.0, 2.0), GameRound::new(0.7, 5.0, 5.0)];
        assert_eq!(tane_growth_rate(&rounds, 10.0).unwrap(), 0.0);
        assert_eq!(tane_growth_upper_bound(&rounds, 10.0).unwrap(), 0.0);
        let double = [GameRound::new(1.0, 0.0, 7.0)];
        assert!((tane_growth_rate(&double, 7.0).unwrap() - 2f64.ln()).abs() < 1e-16);
    }

    #[test]
    fn truncated_st_petersburg_matches_direct_sum() {
        // Heads first on flip n+1 with probability 2^-(n+1) pays 2^n; the last outcome absorbs the tail.
        let n = 20;
        let (w0, cost) = (100.0, 10.0);
        let mut rounds: Vec<_> = (0..n)
            .map(|k| GameRound::new(0.5f64.powi(k + 1), cost, 2f64.powi(k)))
            .collect();
        rounds[(n - 1) as usize].probability *= 2.0;
        let mut direct = 0.0;
        for k in 0..n {
            let p = if k == n - 1 { 0.5f64.powi(k) } else { 0.5f64.powi(k + 1) };
            direct += p * ((w0 - cost + 2f64.powi(k)) / w0).ln();
        }
        assert!((tane_growth_rate(&rounds, w0).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn ruinous_and_invalid_games() {
        let ruin = [GameRound::new(0.5, 20.0, 0.0), GameRound::new(0.5, 0.0, 30.0)];
        assert!(matches!(tane_growth_rate(&ruin, 10.0), Err(Error::CertainRuin(_))));
        let unnormalized = [GameRound::new(0.5, 0.0, 1.0)];
        assert!(matches!(tane_growth_rate(&unnormalized, 10.0), Err(Error::InvalidParameter { .. })));
        let hopeless = [GameRound::new(1.0, 20.0, 0.0)];
        assert!(matches!(tane_growth_upper_bound(&hopeless, 10.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cost_exceeding_reward_gives_negative_bound() {
        let rounds = [GameRound::new(0.5, 3.0, 1.0), GameRound::new(0.5, 3.0, 4.0)];
        let bound = tane_growth_upper_bound(&rounds, 10.0).unwrap();
        assert!(bound < 0.0);
        assert!(tane_growth_rate(&rounds, 10.0).unwrap() < 0.0);
    }

    #[test]
    fn trajectory_values() {
        assert_eq!(wealth_trajectory(3.0, 0.2, 0.0).unwrap(), 3.0);
        assert_eq!(wealth_trajectory(3.0, 0.0, 50.0).unwrap(), 3.0);
        assert!((wealth_trajectory(1.0, 0.1, 10.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn t_max_values() {
        let plan = MinerPlan::new(1.0, 0.5, CostModel::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(t_max(&plan), 1.0);
        let plan = MinerPlan::new(1.0, 0.2, CostModel::new(2.0, 0.1).unwrap()).unwrap();
        assert!((t_max(&plan) - 20.0).abs() < 1e-12);
        let costs = CostModel::new(1.0, 1.0).unwrap();
        let near_one = MinerPlan::new(1.0, 1.0 - 1e-9, costs).unwrap();
        assert!(t_max(&near_one) > 0.0 && t_max(&near_one) < 1e-8);
        assert!(MinerPlan::new(1.0, 1.0, costs).is_err());
        assert!(MinerPlan::new(1.0, 0.0, costs).is_err());
    }

    #[test]
    fn lambda_values() {
        let network = NetworkParams::new(10.0, 1.0, 950.0).unwrap();
        let plan = MinerPlan::new(100.0, 0.5, CostModel::new(1.0, 1.0).unwrap()).unwrap();
        assert!((win_rate_lambda(&plan, &network) - 0.5).abs() < 1e-15);
        let even = NetworkParams::new(8.0, 1.0, 50.0).unwrap();
        assert!((win_rate_lambda(&plan, &even) - 4.0).abs() < 1e-15);
        let tiny = MinerPlan::new(1e-12, 0.5, CostModel::new(1.0, 1.0).unwrap()).unwrap();
        assert!(win_rate_lambda(&tiny, &network) < 1e-12);
    }

    #[test]
    fn conditional_reward_values() {
        let r = conditional_reward_for(1.0, 10.0, 0.001).unwrap();
        assert!((r - 0.10050083333194444).abs() < 1e-15);
        let near = conditional_reward_for(2.0, 50.0, 1.0 - 1e-12).unwrap();
        assert!((near - 2.0).abs() < 1e-9);
        assert!(matches!(conditional_reward_for(1.0, 1.0, 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn conditional_reward_series_matches_closed_form() {
        for &e in &[0.1, 1.0, 10.0] {
            for &q in &[1e-4, 1e-3, 0.05, 0.5] {
                let closed = conditional_reward_for(1.0, e, q).unwrap();
                let series = conditional_reward_series(1.0, e, q).unwrap();
                assert!(((closed - series) / closed).abs() <= 1e-12, "E={e} q={q}");
            }
        }
    }

    #[test]
    fn breakdown_invariants_on_reference() {
        let (plan, network) = reference();
        let b = stochastic_growth_rate(&plan, &network, 1e-10).unwrap();
        assert_eq!(b.g, b.rate * (b.win_term + b.bankrupt_term));
        assert!((b.t_max - 1000.0).abs() < 1e-9);
        assert_eq!(b.bankrupt_term, 0.5f64.ln() * (-b.rate * b.t_max).exp());
        assert!((b.rate - 10.0 * 50.0 / 1050.0).abs() < 1e-14);
    }

    #[test]
    fn profitable_regime_is_positive() {
        // Large rewards relative to running costs and a long runway.
        let network = NetworkParams::new(10.0, 50.0, 1000.0).unwrap();
        let plan = MinerPlan::new(100.0, 0.5, CostModel::new(1.0, 1e-4).unwrap()).unwrap();
        assert!(stochastic_growth_rate(&plan, &network, 1e-10).unwrap().g > 0.0);
    }

    #[test]
    fn tiny_miner_loses() {
        let network = NetworkParams::new(10.0, 1.0, 1000.0).unwrap();
        let plan = MinerPlan::new(1e-3, 0.5, CostModel::new(1.0, 0.01).unwrap()).unwrap();
        assert!(stochastic_growth_rate(&plan, &network, 1e-10).unwrap().g < 0.0);
    }

    #[test]
    fn quadrature_is_stable_under_tolerance_halving() {
        let (plan, network) = reference();
        let a = stochastic_growth_rate(&plan, &network, 1e-10).unwrap().g;
        let b = stochastic_growth_rate(&plan, &network, 5e-11).unwrap().g;
        assert!(((a - b) / a).abs() <= 10.0 * 1e-10);
    }

    #[test]
    fn smooth_gamma_values() {
        let c = |e, r| CostModel::new(e, r).unwrap();
        assert_eq!(smooth_optimal_gamma(1.0, c(1.0, 1.0)).unwrap(), 0.5);
        assert!((smooth_optimal_gamma(1.0, c(2.0, 0.25)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(smooth_optimal_gamma(1e-12, c(1.0, 1.0)).unwrap() > 1.0 - 1e-11);
        for &(tau, ce, cr) in &[(1.0, 1.0, 1e-3), (30.0, 2.0, 0.05), (1e4, 0.3, 1e-9)] {
            let gamma = smooth_optimal_gamma(tau, c(ce, cr)).unwrap();
            let reserve = smooth_optimal_reserve(tau, c(ce, cr)).unwrap();
            assert!((gamma / reserve * tau * ce * cr - 1.0).abs() <= 1e-14);
            assert!((gamma + reserve - 1.0).abs() <= 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn smooth_growth_dual_evaluation_on_reference() {
        let (plan, network) = reference();
        let s = smooth_growth(&plan, &network, 1.0, 1e-10).unwrap();
        assert!(((s.g - s.g_quadrature) / s.g).abs() <= 1e-10);
    }

    #[test]
    fn smooth_pure_cost_game_loses() {
        let network = NetworkParams::new(10.0, 0.0, 1000.0).unwrap();
        let (plan, _) = reference();
        assert!(smooth_growth_rate(&plan, &network, 1.0).unwrap() < 0.0);
        let ruinous = MinerPlan::new(100.0, 0.5, CostModel::new(1.0, 10.0).unwrap()).unwrap();
        assert!(matches!(smooth_growth_rate(&ruinous, &network, 1.0), Err(Error::CertainRuin(_))));
    }

    #[test]
    fn smooth_break_even_is_small_and_negative() {
        // Reward equals the average running cost over the period: ε(t) = γ c_e c_r (τ/2 - t).
        let costs = CostModel::new(1.0, 0.01).unwrap();
        let plan = MinerPlan::new(100.0, 0.5, costs).unwrap();
        let period = 2.0;
        let burn = 0.5 * 0.01;
        let p0 = 1000.0;
        // gain = γ M c_e / (P0 + γ W c_e) = burn·τ/2
        let m = burn * period / 2.0 * (p0 + plan.purchased_power()) / 0.5;
        let network = NetworkParams::new(10.0, m, p0).unwrap();
        let g = smooth_growth_rate(&plan, &network, period).unwrap();
        let sup_eps = burn * period / 2.0;
        assert!(g < 0.0 && g.abs() <= sup_eps * sup_eps, "g = {g}");
    }

    #[test]
    fn smooth_growth_ignores_wealth_for_small_miners() {
        let network = NetworkParams::new(10.0, 5.0, 1e9).unwrap();
        let costs = CostModel::new(1.0, 1e-3).unwrap();
        let a = smooth_growth_rate(&MinerPlan::new(100.0, 0.5, costs).unwrap(), &network, 1.0).unwrap();
        let b = smooth_growth_rate(&MinerPlan::new(200.0, 0.5, costs).unwrap(), &network, 1.0).unwrap();
        assert!(((a - b) / a).abs() <= 1e-6);
    }

    #[test]
    fn stable_log_ratio_helper() {
        for &r in &[1e-8f64, 1e-4, 9.99e-4, 1e-3, 0.5, 3.0] {
            let direct = r.ln_1p() / r - 1.0;
            assert!((log1p_ratio_minus_one(r) - direct).abs() < 1e-12);
        }
    }

    fn small_config() -> OptimizerConfig {
        OptimizerConfig { grid_size: 128, ..OptimizerConfig::default() }
    }

    #[test]
    fn optimizer_is_deterministic_and_maximal() {
        let (plan, network) = reference();
        let costs = plan.costs();
        let a = optimize_gamma(plan.wealth, costs, &network, &small_config()).unwrap();
        let b = optimize_gamma(plan.wealth, costs, &network, &small_config()).unwrap();
        assert_eq!(a.gamma.to_bits(), b.gamma.to_bits());
        assert_eq!(a.g.to_bits(), b.g.to_bits());
        for i in 0..50 {
            let gamma = 0.01 + 0.98 * f64::from(i) / 49.0;
            assert!(growth_at(plan.wealth, costs, &network, gamma, 1e-10) <= a.g);
        }
    }

    #[test]
    fn bigger_reward_does_not_hurt() {
        let (plan, network) = reference();
        let richer = NetworkParams { block_reward: 2.0, ..network };
        let a = optimize_gamma(plan.wealth, plan.costs(), &network, &small_config()).unwrap();
        let b = optimize_gamma(plan.wealth, plan.costs(), &richer, &small_config()).unwrap();
        assert!(b.g >= a.g);
    }

    #[test]
    fn fee_bound_of_identical_rates_is_zero() {
        let bound = FeeBound {
            relative_bound: 0.0,
            profitability_bound: 0.1,
            g_smooth: 0.1,
            g_star: 0.1,
            smooth_split: 0.5,
            stochastic_split: 0.5,
        };
        assert!(!bound.is_acceptable(0.0));
        assert!(bound.is_acceptable(-1e-9));
    }

    #[test]
    fn fee_bound_recomputes() {
        let (plan, network) = reference();
        let config = small_config();
        let bound = max_pool_fee(plan.wealth, plan.costs(), &network, 1.0, &config).unwrap();
        let gs = smooth_optimal_gamma(1.0, plan.costs()).unwrap();
        let g_smooth = smooth_growth_rate(&MinerPlan::new(plan.wealth, gs, plan.costs()).unwrap(), &network, 1.0).unwrap();
        let g_star = optimize_gamma(plan.wealth, plan.costs(), &network, &config).unwrap().g;
        assert!((bound.relative_bound - (g_smooth - g_star)).abs() <= 1e-10 * bound.relative_bound.abs().max(1e-300));
        assert_eq!(bound.profitability_bound, g_smooth);
    }
}
