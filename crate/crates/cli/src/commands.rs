use std::path::PathBuf;

use minerwealth::growth::{
    expand_wealth_bracket, max_pool_fee, min_viable_wealth, optimize_gamma, smooth_growth, stochastic_growth_rate,
    OptimizerConfig,
};
use minerwealth::mcsim::{
    estimate_first_win_time, estimate_ruin, round_oracle, round_oracle_trials, simulate_total_reward, RewardMode,
    SimConfig,
};
use minerwealth::rewarddist::{
    expected_total_reward, total_reward_pmf, variance_paper, variance_thinned, DEFAULT_TAIL_TOL,
};
use minerwealth::waiting::{
    bankruptcy_horizon, bankruptcy_probability, expected_wait, wait_variance, waiting_cdf, waiting_pdf,
};
use minerwealth::{BankruptcyInputs, WaitParams};
use serde_json::{json, Value};

use crate::output::{Cell, Writer};
use crate::verify::run_suite;
use crate::{CliError, Command, Common, Format, Oracle, Scenario};

pub const DEFAULT_SAMPLES: usize = 100_000;

pub fn optimizer_config(common: &Common) -> OptimizerConfig {
    OptimizerConfig { grid_size: common.grid_size, quad_tol: common.quad_tol, ..OptimizerConfig::default() }
}

fn settings(common: &Common, extra: Value) -> Value {
    let mut base = json!({
        "quad_tol": common.quad_tol,
        "grid_size": common.grid_size,
        "samples": common.samples.unwrap_or(DEFAULT_SAMPLES),
        "format": match common.format { Format::Csv => "csv", Format::Json => "json" },
    });
    if let (Value::Object(base), Value::Object(extra)) = (&mut base, extra) {
        base.extend(extra);
    }
    base
}

pub fn dispatch(command: &Command, scenario: &Scenario) -> Result<Vec<PathBuf>, CliError> {
    let common = command.common();
    let extra = match command {
        Command::Wait { x_max, x_step, .. } => json!({ "x_max": x_max, "x_step": x_step }),
        Command::Optimize { w_min, .. } => json!({ "w_min": w_min }),
        Command::Simulate { oracle, trials, .. } => json!({ "oracle": oracle_name(*oracle), "trials": trials }),
        _ => json!({}),
    };
    let mut out = Writer::new(
        &common.out,
        common.format,
        command.name(),
        common.seed,
        settings(common, extra),
        scenario.to_json(),
    );
    match command {
        Command::Dist(_) => dist(scenario, &mut out)?,
        Command::Wait { x_max, x_step, .. } => wait(scenario, *x_max, *x_step, &mut out)?,
        Command::Growth(c) => growth(scenario, c, &mut out)?,
        Command::Optimize { common, w_min } => optimize(scenario, common, *w_min, &mut out)?,
        Command::Fee(c) => fee(scenario, c, &mut out)?,
        Command::Simulate { common, oracle, trials } => simulate(scenario, common, *oracle, *trials, &mut out)?,
        Command::Verify(c) => {
            let suite = run_suite(scenario, c)?;
            print!("{}", suite.table());
            out.json("verify", serde_json::to_value(&suite).expect("suite serializes"))?;
            let failed = suite.failures();
            if failed > 0 {
                return Err(CliError::VerifyFailed(failed));
            }
        }
    }
    Ok(out.finish())
}

fn oracle_name(oracle: Oracle) -> &'static str {
    match oracle {
        Oracle::Round => "round",
        Oracle::RoundSampled => "round-sampled",
        Oracle::FirstWin => "first-win",
        Oracle::TotalReward => "total-reward",
        Oracle::Ruin => "ruin",
    }
}

fn dist(scenario: &Scenario, out: &mut Writer) -> Result<(), CliError> {
    let window = scenario.window("dist")?;
    let pmf = total_reward_pmf(&window, DEFAULT_TAIL_TOL)?;
    let rows: Vec<Vec<Cell>> = pmf.points().map(|(x, p)| vec![Cell::Float(x), Cell::Float(p)]).collect();
    out.table("dist_pmf", &["lattice_point", "probability"], &rows)?;
    out.json(
        "dist_moments",
        json!({
            "win_probability": window[0].share.win_probability,
            "epochs": window.len(),
            "step": pmf.step(),
            "tail_tol": pmf.tail_tol(),
            "total_mass": pmf.total_mass(),
            "expected_total_reward": expected_total_reward(&window)?,
            "variance_thinned": variance_thinned(&window)?,
            "variance_paper": variance_paper(&window)?,
            "pmf_mean": pmf.mean(),
            "pmf_variance": pmf.variance(),
        }),
    )
}

fn wait(scenario: &Scenario, x_max: f64, x_step: f64, out: &mut Writer) -> Result<(), CliError> {
    if !(x_step > 0.0 && x_max >= 0.0 && x_max.is_finite()) {
        return Err(CliError::Scenario(format!("need --x-step > 0 and finite --x-max ≥ 0, got {x_step}, {x_max}")));
    }
    let share = scenario.share("wait")?;
    let params = WaitParams::new(scenario.expected_blocks, share.win_probability)?;
    let points = (x_max / x_step + 1e-9).floor() as u64;
    let mut rows = Vec::with_capacity(points as usize + 1);
    for i in 0..=points {
        let x = i as f64 * x_step;
        rows.push(vec![Cell::Float(x), Cell::Float(waiting_cdf(x, &params)?), Cell::Float(waiting_pdf(x, &params)?)]);
    }
    out.table("wait_grid", &["x", "cdf", "pdf"], &rows)?;
    let bankruptcy = match scenario.gamma {
        Some(_) => {
            let plan = scenario.plan("wait")?;
            let inputs = BankruptcyInputs::new(plan.reserve(), plan.running_cost())?;
            json!({
                "initial_wealth": inputs.initial_wealth,
                "cost_per_epoch": inputs.cost_per_epoch,
                "horizon": bankruptcy_horizon(&inputs),
                "probability": bankruptcy_probability(&inputs, &params),
            })
        }
        None => Value::Null,
    };
    out.json(
        "wait_summary",
        json!({
            "win_probability": params.win_probability,
            "rate": params.rate,
            "expected_wait": expected_wait(&params)?,
            "wait_variance": wait_variance(&params)?,
            "bankruptcy": bankruptcy,
        }),
    )
}

fn growth(scenario: &Scenario, common: &Common, out: &mut Writer) -> Result<(), CliError> {
    let plan = scenario.plan("growth")?;
    let network = scenario.network()?;
    let stochastic = stochastic_growth_rate(&plan, &network, common.quad_tol)?;
    let smooth = smooth_growth(&plan, &network, scenario.tau, common.quad_tol)?;
    out.json("growth", json!({ "stochastic": stochastic, "smooth": smooth }))
}

fn optimize(scenario: &Scenario, common: &Common, w_min: bool, out: &mut Writer) -> Result<(), CliError> {
    let network = scenario.network()?;
    let costs = scenario.costs()?;
    let config = optimizer_config(common);
    let optimum = optimize_gamma(scenario.wealth, costs, &network, &config)?;
    let viable = if w_min {
        let bracket = expand_wealth_bracket(scenario.wealth, costs, &network, &config)?;
        let found = min_viable_wealth(costs, &network, bracket, &config)?;
        json!({ "bracket": [bracket.0, bracket.1], "wealth": found.wealth, "iterations": found.iterations, "optimum": found.optimum })
    } else {
        Value::Null
    };
    out.json(
        "optimize",
        json!({
            "gamma_star": optimum.gamma,
            "g_star": optimum.g,
            "is_local_max": optimum.is_local_max(),
            "optimum": optimum,
            "w_min": viable,
        }),
    )
}

fn fee(scenario: &Scenario, common: &Common, out: &mut Writer) -> Result<(), CliError> {
    let bound = max_pool_fee(
        scenario.wealth,
        scenario.costs()?,
        &scenario.network()?,
        scenario.tau,
        &optimizer_config(common),
    )?;
    out.json("fee", json!(bound))
}

fn simulate(scenario: &Scenario, common: &Common, oracle: Oracle, trials: bool, out: &mut Writer) -> Result<(), CliError> {
    let config = SimConfig::new(common.seed, common.samples.unwrap_or(DEFAULT_SAMPLES));
    let network = scenario.network()?;
    let result = match oracle {
        Oracle::Round | Oracle::RoundSampled => {
            let mode = if oracle == Oracle::Round { RewardMode::ConditionalMean } else { RewardMode::Sampled };
            let plan = scenario.plan("simulate")?;
            let report = round_oracle(&plan, &network, &config, mode)?;
            let closed = stochastic_growth_rate(&plan, &network, common.quad_tol)?.g;
            if trials {
                let rows: Vec<Vec<Cell>> = round_oracle_trials(&plan, &network, &config, mode)?
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        vec![Cell::Int(i as u64), Cell::Text(if t.won { "win" } else { "ruin" }), Cell::Float(t.payoff)]
                    })
                    .collect();
                out.table("simulate_trials", &["trial", "outcome", "value"], &rows)?;
            }
            json!({ "report": report, "closed_form": closed, "z_score": report.z_score(closed) })
        }
        Oracle::FirstWin => {
            let share = scenario.share("simulate")?;
            let params = WaitParams::new(scenario.expected_blocks, share.win_probability)?;
            let found = estimate_first_win_time(&network, &share, &config)?;
            let closed = expected_wait(&params)?;
            if trials {
                let mut rows: Vec<Vec<Cell>> = found
                    .times
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| vec![Cell::Int(i as u64), Cell::Text("win"), Cell::Float(t)])
                    .collect();
                let start = rows.len();
                rows.extend(
                    (0..found.censored).map(|i| vec![Cell::Int((start + i) as u64), Cell::Text("censored"), Cell::Float(f64::INFINITY)]),
                );
                out.table("simulate_trials", &["trial", "outcome", "value"], &rows)?;
            }
            json!({
                "report": found.time,
                "epoch_report": found.epoch,
                "censored": found.censored,
                "ks_distance": found.ks_distance(|x| waiting_cdf(x, &params).unwrap_or(f64::NAN)),
                "closed_form": closed,
                "z_score": found.time.z_score(closed),
            })
        }
        Oracle::TotalReward => {
            reject_trials(trials, oracle)?;
            let window = scenario.window("simulate")?;
            let moments = simulate_total_reward(&window, &config)?;
            let mean = expected_total_reward(&window)?;
            json!({
                "report": moments.mean,
                "variance": moments.variance,
                "variance_std_error": moments.variance_std_error,
                "closed_form": mean,
                "z_score": moments.mean.z_score(mean),
                "variance_thinned": variance_thinned(&window)?,
                "variance_paper": variance_paper(&window)?,
            })
        }
        Oracle::Ruin => {
            reject_trials(trials, oracle)?;
            let plan = scenario.plan("simulate")?;
            let horizon = scenario.epochs;
            let ruin = estimate_ruin(&plan, &network, horizon, &config)?;
            let rate = network.expected_blocks * plan.win_probability(&network);
            let no_win = (-(horizon as f64) * rate).exp();
            json!({
                "report": ruin.ruin,
                "no_win": ruin.no_win,
                "horizon": horizon,
                "no_win_closed_form": no_win,
            })
        }
    };
    out.json("simulate", result)
}

fn reject_trials(trials: bool, oracle: Oracle) -> Result<(), CliError> {
    if trials {
        Err(CliError::Scenario(format!("--trials is not available for the {} oracle", oracle_name(oracle))))
    } else {
        Ok(())
    }
}
