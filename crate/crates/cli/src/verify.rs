//! Closed-form-vs-Monte-Carlo oracle suite run by `verify`.

use minerwealth::growth::{
    max_pool_fee, optimize_gamma, smooth_growth, smooth_optimal_gamma, smooth_optimal_reserve, stochastic_growth_rate, tane_growth_rate,
    tane_growth_upper_bound, GameRound, MinerPlan,
};
use minerwealth::mcsim::sampling::SimRng;
use minerwealth::mcsim::{
    estimate_first_win_time, estimate_no_win_probability, round_oracle, simulate_pool_trajectory,
    simulate_total_reward, simulate_wealth_path, RewardMode, SimConfig,
};
use minerwealth::rewarddist::{
    expected_total_reward, total_reward_pmf, variance_thinned, win_count_pmf_closed, win_count_pmf_series,
    DEFAULT_TAIL_TOL, DEFAULT_TERM_TOL,
};
use minerwealth::waiting::{bankruptcy_horizon, bankruptcy_probability, expected_wait, waiting_cdf};
use minerwealth::{BankruptcyInputs, NetworkParams, WaitParams};
use serde::Serialize;

use crate::commands::{optimizer_config, DEFAULT_SAMPLES};
use crate::{CliError, Common, Scenario};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Suite {
    pub samples: usize,
    pub checks: Vec<Check>,
}

impl Suite {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn table(&self) -> String {
        let mut text = format!("{:<24} {:<6} {:>24} {:>24} {:>12}\n", "check", "status", "value", "reference", "tolerance");
        for c in &self.checks {
            text.push_str(&format!(
                "{:<24} {:<6} {:>24.16e} {:>24.16e} {:>12.3e}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.value,
                c.reference,
                c.tolerance
            ));
        }
        text
    }
}

struct Builder {
    checks: Vec<Check>,
}

impl Builder {
    /// `|value - reference| ≤ tolerance`.
    fn close(&mut self, name: &'static str, value: f64, reference: f64, tolerance: f64) {
        let passed = (value - reference).abs() <= tolerance;
        self.checks.push(Check { name, passed, value, reference, tolerance });
    }

    /// `value ≤ reference + tolerance`.
    fn at_most(&mut self, name: &'static str, value: f64, reference: f64, tolerance: f64) {
        let passed = value <= reference + tolerance;
        self.checks.push(Check { name, passed, value, reference, tolerance });
    }

    /// `value > reference`.
    fn exceeds(&mut self, name: &'static str, value: f64, reference: f64) {
        let passed = value > reference;
        self.checks.push(Check { name, passed, value, reference, tolerance: 0.0 });
    }
}

/// Runs every check the scenario supports. Plan-based checks need `gamma`.
pub fn run_suite(scenario: &Scenario, common: &Common) -> Result<Suite, CliError> {
    let samples = common.samples.unwrap_or(DEFAULT_SAMPLES);
    let config = SimConfig::new(common.seed, samples);
    let network = scenario.network()?;
    let share = scenario.share("verify")?;
    let q = share.win_probability;
    let e = scenario.expected_blocks;
    let mut b = Builder { checks: Vec::new() };

    let worst = (0..=50u64)
        .map(|v| Ok((win_count_pmf_series(v, e, q, DEFAULT_TERM_TOL)? - win_count_pmf_closed(v, e, q)?).abs()))
        .collect::<Result<Vec<f64>, minerwealth::Error>>()?
        .into_iter()
        .fold(0.0, f64::max);
    b.close("thinning", worst, 0.0, 1e-12);

    let window = scenario.window("verify")?;
    let pmf = total_reward_pmf(&window, DEFAULT_TAIL_TOL)?;
    b.close("pmf_mass", pmf.total_mass(), 1.0, DEFAULT_TAIL_TOL);
    let mean = expected_total_reward(&window)?;
    b.close("pmf_mean", pmf.mean(), mean, 1e-9 * mean.max(1.0));

    let moments = simulate_total_reward(&window, &config.with_stream(1))?;
    b.close("reward_mean_mc", moments.mean.estimate, mean, 3.0 * moments.mean.std_error);
    b.close("reward_variance_mc", moments.variance, variance_thinned(&window)?, 3.0 * moments.variance_std_error);

    if q > 0.0 {
        let params = WaitParams::new(e, q)?;
        let first = estimate_first_win_time(&network, &share, &config.with_stream(2))?;
        b.close("first_win_mean_mc", first.time.estimate, expected_wait(&params)?, 3.0 * first.time.std_error);
        let ks = first.ks_distance(|x| waiting_cdf(x, &params).unwrap_or(f64::NAN));
        b.at_most("first_win_ks_mc", ks, 0.0, 0.01);
    }

    if scenario.gamma.is_some() {
        let plan = scenario.plan("verify")?;
        plan_checks(&mut b, &plan, &network, scenario, common, &config)?;
    }

    b.at_most("tane_jensen", jensen_worst(common.seed, 1000)?, 0.0, 1e-12);
    Ok(Suite { samples, checks: b.checks })
}

fn plan_checks(
    b: &mut Builder,
    plan: &MinerPlan,
    network: &NetworkParams,
    scenario: &Scenario,
    common: &Common,
    config: &SimConfig,
) -> Result<(), CliError> {
    let q = plan.win_probability(network);

    let drained = NetworkParams::new(network.expected_blocks, 0.0, network.network_power)?;
    let inputs = BankruptcyInputs::new(plan.reserve(), plan.running_cost())?;
    let horizon = bankruptcy_horizon(&inputs);
    let path = simulate_wealth_path(plan, &drained, horizon.saturating_add(1), config)?;
    let ruin_epoch = path.bankrupt_epoch.map_or(f64::NAN, |k| k as f64);
    b.close("drain_ruin_epoch", ruin_epoch, minerwealth::growth::t_max(plan).ceil(), 0.0);

    let share = minerwealth::MinerShare::from_probability(q, network)?;
    let no_win = if horizon <= 1_000_000 {
        estimate_no_win_probability(network, &share, horizon, &config.with_stream(3))?
    } else {
        // Too long to simulate; the closed form is below any representable frequency anyway.
        minerwealth::mcsim::SimReport { estimate: 0.0, std_error: 0.0, samples: 0, seed: config.seed }
    };
    let wait = WaitParams::new(network.expected_blocks, q)?;
    let closed = bankruptcy_probability(&inputs, &wait);
    let se = no_win.std_error.max((closed * (1.0 - closed) / config.sample_count as f64).sqrt());
    b.close("no_win_before_ruin_mc", no_win.estimate, closed, 3.0 * se);

    let breakdown = stochastic_growth_rate(plan, network, common.quad_tol)?;
    let mean_mode = round_oracle(plan, network, &config.with_stream(4), RewardMode::ConditionalMean)?;
    b.close("growth_round_mc", mean_mode.estimate, breakdown.g, 3.0 * mean_mode.std_error);
    let sampled = round_oracle(plan, network, &config.with_stream(4), RewardMode::Sampled)?;
    b.at_most("growth_sampled_jensen", sampled.estimate, mean_mode.estimate, 3.0 * sampled.std_error);

    let smooth = smooth_growth(plan, network, scenario.tau, common.quad_tol)?;
    b.close(
        "smooth_closed_form",
        smooth.g_quadrature,
        smooth.g,
        1e-10 * smooth.g.abs().max(f64::MIN_POSITIVE),
    );
    let costs = plan.costs();
    let gamma = smooth_optimal_gamma(scenario.tau, costs)?;
    let reserve = smooth_optimal_reserve(scenario.tau, costs)?;
    b.close(
        "smooth_optimal_split",
        gamma / reserve * scenario.tau * costs.running_rate * costs.equipment_rate,
        1.0,
        1e-14,
    );

    let settings = optimizer_config(common);
    let optimum = optimize_gamma(plan.wealth, costs, network, &settings)?;
    b.at_most("optimizer_beats_split", breakdown.g, optimum.g, 1e-12 * optimum.g.abs().max(1.0));
    b.at_most(
        "optimizer_curvature",
        optimum.second_derivative.unwrap_or(f64::NAN),
        0.0,
        optimum.curvature_noise,
    );

    let fee = max_pool_fee(plan.wealth, costs, network, scenario.tau, &settings)?;
    let epochs = 1000;
    let solo = plan.wealth * (fee.g_star * epochs as f64).exp();
    let under = simulate_pool_trajectory(plan.wealth, fee.g_smooth, fee.relative_bound - 1e-6, epochs)?;
    let over = simulate_pool_trajectory(plan.wealth, fee.g_smooth, fee.relative_bound + 1e-6, epochs)?;
    let margin = |pool: f64| (pool / solo).ln();
    b.exceeds("fee_below_bound_wins", margin(under[epochs as usize]), 0.0);
    b.exceeds("fee_above_bound_loses", -margin(over[epochs as usize]), 0.0);
    Ok(())
}

/// Largest `g - bound` over `games` random finite games.
pub fn jensen_worst(seed: u64, games: usize) -> Result<f64, CliError> {
    let mut rng = SimRng::new(seed, 0xA11CE);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..games {
        let outcomes = 2 + (rng.uniform() * 6.0) as usize;
        let wealth = 1.0 + 99.0 * rng.uniform();
        let weights: Vec<f64> = (0..outcomes).map(|_| rng.uniform_open()).collect();
        let total: f64 = weights.iter().sum();
        let mut rounds: Vec<GameRound> = weights
            .iter()
            .map(|w| {
                let cost = 0.9 * wealth * rng.uniform();
                let reward = 2.0 * wealth * rng.uniform();
                GameRound::new(w / total, cost, reward)
            })
            .collect();
        // Force the probabilities to sum to one in floating point.
        let head: f64 = rounds[1..].iter().map(|r| r.probability).sum();
        rounds[0].probability = 1.0 - head;
        let g = tane_growth_rate(&rounds, wealth)?;
        let bound = tane_growth_upper_bound(&rounds, wealth)?;
        worst = worst.max(g - bound);
    }
    Ok(worst)
}
