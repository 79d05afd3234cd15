//! Seeded Monte Carlo oracles for the closed forms.
//!
//! Trials are split into fixed-size chunks. Chunk `c` of a run draws from the
//! ChaCha8 stream `(stream_id << 32) | (c << 1) | lane`, so results depend only
//! on `(seed, stream_id, sample_count)` and not on the thread count. Chunk
//! results are merged in chunk order.

pub mod sampling;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::growth::{conditional_reward_for, t_max, MinerPlan};
use crate::rewarddist::{EpochSpec, MinerShare, NetworkParams};
use sampling::{binomial, Poisson, SimRng, ZeroTruncatedPoisson};

/// Trials per chunk.
pub const CHUNK_SIZE: usize = 1 << 14;
/// Epochs simulated per first-win trial before it is right-censored.
pub const CENSOR_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub sample_count: usize,
    pub stream_id: u32,
}

impl SimConfig {
    pub fn new(seed: u64, sample_count: usize) -> Self {
        Self { seed, sample_count, stream_id: 0 }
    }

    pub fn with_stream(self, stream_id: u32) -> Self {
        Self { stream_id, ..self }
    }

    fn rng(&self, chunk: usize, lane: u64) -> SimRng {
        let stream = (u64::from(self.stream_id) << 32) | ((chunk as u64) << 1) | lane;
        SimRng::new(self.seed, stream)
    }

    fn chunks(&self) -> Vec<(usize, usize)> {
        (0..self.sample_count.div_ceil(CHUNK_SIZE))
            .map(|c| (c, CHUNK_SIZE.min(self.sample_count - c * CHUNK_SIZE)))
            .collect()
    }

    fn check(&self) -> Result<()> {
        if self.sample_count < 2 {
            return Err(Error::invalid("sample_count", "need at least two samples"));
        }
        Ok(())
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

impl SimReport {
    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.std_error
    }

    /// Distance to `value` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.estimate - value) / self.std_error
    }
}

/// Running mean and sum of squared deviations (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn report(&self, seed: u64) -> SimReport {
        self.scaled_report(1.0, seed)
    }

    fn scaled_report(&self, scale: f64, seed: u64) -> SimReport {
        SimReport {
            estimate: scale * self.mean,
            std_error: scale.abs() * (self.variance() / self.n as f64).sqrt(),
            samples: self.n,
            seed,
        }
    }
}

fn merge_all(parts: &[Accumulator]) -> Accumulator {
    let mut total = Accumulator::default();
    for p in parts {
        total.merge(p);
    }
    total
}

/// One simulated epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochOutcome {
    /// 1-based.
    pub epoch_index: u64,
    pub blocks_total: u64,
    pub blocks_won: u64,
    pub reward: f64,
}

/// Per-epoch draws `w ~ Poisson(E)`, `v ~ Binomial(w, q)`, reward `M·v`.
pub struct EpochStream {
    rng: SimRng,
    blocks: Poisson,
    win_probability: f64,
    block_reward: f64,
    next_index: u64,
    remaining: usize,
}

impl Iterator for EpochStream {
    type Item = EpochOutcome;

    fn next(&mut self) -> Option<EpochOutcome> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let blocks_total = self.blocks.sample(&mut self.rng);
        let blocks_won = binomial(&mut self.rng, blocks_total, self.win_probability);
        let outcome = EpochOutcome {
            epoch_index: self.next_index,
            blocks_total,
            blocks_won,
            reward: self.block_reward * blocks_won as f64,
        };
        self.next_index += 1;
        Some(outcome)
    }
}

/// Epoch-level protocol simulation of `config.sample_count` epochs.
pub fn simulate_epochs(network: &NetworkParams, share: &MinerShare, config: &SimConfig) -> EpochStream {
    EpochStream {
        rng: config.rng(0, 0),
        blocks: Poisson::new(network.expected_blocks),
        win_probability: share.win_probability,
        block_reward: network.block_reward,
        next_index: 1,
        remaining: config.sample_count,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstWinReport {
    /// Continuous first-win time in epochs:
    /// `(k - 1) + min(U_1, …, U_v)` for a first win in epoch `k` with `v` won blocks.
    pub time: SimReport,
    /// 1-based index of the first epoch with a win.
    pub epoch: SimReport,
    pub censored: usize,
    /// Continuous first-win times in trial order (censored trials omitted).
    pub times: Vec<f64>,
    pub epochs: Vec<u64>,
}

impl FirstWinReport {
    /// Fraction of uncensored trials whose first win came by epoch `k`, for `k = 0..=max_epoch`.
    pub fn empirical_cdf_on_grid(&self, max_epoch: u64) -> Vec<f64> {
        let mut counts = vec![0usize; max_epoch as usize + 1];
        for &e in &self.epochs {
            if e <= max_epoch {
                counts[e as usize] += 1;
            }
        }
        let n = (self.epochs.len() + self.censored) as f64;
        let mut cumulative = 0usize;
        counts
            .iter()
            .map(|c| {
                cumulative += c;
                cumulative as f64 / n
            })
            .collect()
    }

    /// Kolmogorov–Smirnov distance of the continuous first-win times to `cdf`.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let mut sorted = self.times.clone();
        sorted.sort_by(f64::total_cmp);
        let n = (sorted.len() + self.censored) as f64;
        sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Simulates epochs until the miner's first win, `config.sample_count` times.
pub fn estimate_first_win_time(network: &NetworkParams, share: &MinerShare, config: &SimConfig) -> Result<FirstWinReport> {
    config.check()?;
    if !(share.win_probability > 0.0) {
        return Err(Error::Degenerate("a miner with q = 0 never wins".into()));
    }
    let blocks = Poisson::new(network.expected_blocks);
    let q = share.win_probability;
    let parts: Vec<_> = config
        .chunks()
        .into_par_iter()
        .map(|(chunk, len)| {
            let mut rng = config.rng(chunk, 0);
            let mut times = Vec::with_capacity(len);
            let mut epochs = Vec::with_capacity(len);
            let mut censored = 0;
            for _ in 0..len {
                let mut k = 0u64;
                loop {
                    k += 1;
                    if k > CENSOR_CAP {
                        censored += 1;
                        break;
                    }
                    let w = blocks.sample(&mut rng);
                    if w == 0 {
                        continue;
                    }
                    let v = binomial(&mut rng, w, q);
                    if v >= 1 {
                        // Minimum of v uniform arrival times within the epoch.
                        let offset = 1.0 - rng.uniform_open().powf(1.0 / v as f64);
                        times.push((k - 1) as f64 + offset);
                        epochs.push(k);
                        break;
                    }
                }
            }
            (times, epochs, censored)
        })
        .collect();

    let mut times = Vec::with_capacity(config.sample_count);
    let mut epochs = Vec::with_capacity(config.sample_count);
    let mut censored = 0;
    for (t, e, c) in parts {
        times.extend(t);
        epochs.extend(e);
        censored += c;
    }
    let mut time_acc = Accumulator::default();
    times.iter().for_each(|&t| time_acc.push(t));
    let mut epoch_acc = Accumulator::default();
    epochs.iter().for_each(|&e| epoch_acc.push(e as f64));
    Ok(FirstWinReport {
        time: time_acc.report(config.seed),
        epoch: epoch_acc.report(config.seed),
        censored,
        times,
        epochs,
    })
}

/// Fraction of trials with no win in the first `epochs` epochs.
pub fn estimate_no_win_probability(network: &NetworkParams, share: &MinerShare, epochs: u64, config: &SimConfig) -> Result<SimReport> {
    config.check()?;
    let blocks = Poisson::new(network.expected_blocks);
    let q = share.win_probability;
    let parts: Vec<Accumulator> = config
        .chunks()
        .into_par_iter()
        .map(|(chunk, len)| {
            let mut rng = config.rng(chunk, 0);
            let mut acc = Accumulator::default();
            for _ in 0..len {
                let won = (0..epochs).any(|_| {
                    let w = blocks.sample(&mut rng);
                    binomial(&mut rng, w, q) >= 1
                });
                acc.push(if won { 0.0 } else { 1.0 });
            }
            acc
        })
        .collect();
    Ok(merge_all(&parts).report(config.seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub mean: SimReport,
    pub variance: f64,
    /// Large-sample standard error of the sample variance, `sqrt((m4 - s⁴)/n)`.
    pub variance_std_error: f64,
}

/// Total reward over the window, simulated epoch by epoch, `config.sample_count` paths.
pub fn simulate_total_reward(epochs: &[EpochSpec], config: &SimConfig) -> Result<MomentReport> {
    config.check()?;
    if epochs.is_empty() {
        return Err(Error::invalid("epochs", "window must be nonempty"));
    }
    let samplers: Vec<(Poisson, f64, f64)> = epochs
        .iter()
        .map(|e| (Poisson::new(e.network.expected_blocks), e.share.win_probability, e.network.block_reward))
        .collect();
    let totals: Vec<f64> = config
        .chunks()
        .into_par_iter()
        .flat_map_iter(|(chunk, len)| {
            let mut rng = config.rng(chunk, 0);
            let samplers = &samplers;
            (0..len)
                .map(move |_| {
                    samplers
                        .iter()
                        .map(|(blocks, q, m)| {
                            let w = blocks.sample(&mut rng);
                            m * binomial(&mut rng, w, *q) as f64
                        })
                        .sum::<f64>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut acc = Accumulator::default();
    totals.iter().for_each(|&t| acc.push(t));
    let mean = acc.mean();
    let n = totals.len() as f64;
    let m4 = totals.iter().map(|t| (t - mean).powi(4)).sum::<f64>() / n;
    let variance = acc.variance();
    Ok(MomentReport {
        mean: acc.report(config.seed),
        variance,
        variance_std_error: ((m4 - variance * variance).max(0.0) / n).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Use the conditional expected reward in every winning trial.
    ConditionalMean,
    /// Draw the reward; its mean equals the conditional expected reward.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTrial {
    pub wait: f64,
    pub won: bool,
    pub reward: f64,
    pub payoff: f64,
}

struct RoundModel {
    rate: f64,
    horizon: f64,
    burn: f64,
    wealth: f64,
    split_log: f64,
    mean_reward: f64,
    reward_unit: f64,
    wins: Option<ZeroTruncatedPoisson>,
}

impl RoundModel {
    fn new(plan: &MinerPlan, network: &NetworkParams, mode: RewardMode) -> Result<Self> {
        let q = plan.win_probability(network);
        let rate = network.expected_blocks * q;
        let mean_reward = conditional_reward_for(network.block_reward, network.expected_blocks, q)?;
        Ok(Self {
            rate,
            horizon: t_max(plan),
            burn: plan.split * plan.running_rate * plan.equipment_rate,
            wealth: plan.wealth,
            split_log: plan.split.ln(),
            mean_reward,
            // v ~ Poisson(Eq) | v ≥ 1 has mean Eq/(1-e^{-Eq}); pay M/E per block so that
            // E[R] matches the conditional expected reward M·q/(1-e^{-Eq}).
            reward_unit: network.block_reward / network.expected_blocks,
            wins: match mode {
                RewardMode::ConditionalMean => None,
                RewardMode::Sampled => Some(ZeroTruncatedPoisson::new(rate)),
            },
        })
    }

    fn trial(&self, wait_rng: &mut SimRng, reward_rng: &mut SimRng) -> RoundTrial {
        let wait = wait_rng.exponential(self.rate);
        if wait <= self.horizon {
            let reward = match &self.wins {
                None => self.mean_reward,
                Some(wins) => self.reward_unit * wins.sample(reward_rng) as f64,
            };
            let payoff = (reward / self.wealth - wait * self.burn).ln_1p();
            RoundTrial { wait, won: true, reward, payoff }
        } else {
            RoundTrial { wait, won: false, reward: 0.0, payoff: self.split_log }
        }
    }
}

fn round_trials_chunked<T: Send>(
    plan: &MinerPlan,
    network: &NetworkParams,
    config: &SimConfig,
    mode: RewardMode,
    per_chunk: impl Fn(&RoundModel, &mut SimRng, &mut SimRng, usize) -> T + Sync,
) -> Result<Vec<T>> {
    config.check()?;
    let model = RoundModel::new(plan, network, mode)?;
    Ok(config
        .chunks()
        .into_par_iter()
        .map(|(chunk, len)| {
            let mut wait_rng = config.rng(chunk, 0);
            let mut reward_rng = config.rng(chunk, 1);
            per_chunk(&model, &mut wait_rng, &mut reward_rng, len)
        })
        .collect())
}

/// Mirrors the stochastic growth formula trial by trial: `t ~ Exp(λ)`; a win
/// before `t_max` pays `log(1 - tγc_rc_e + R/W)`, otherwise `log γ`. The
/// estimate is `λ` times the mean payoff.
///
/// Waits and rewards use separate streams, so both modes see the same waits for a given seed.
pub fn round_oracle(plan: &MinerPlan, network: &NetworkParams, config: &SimConfig, mode: RewardMode) -> Result<SimReport> {
    let rate = crate::growth::win_rate_lambda(plan, network);
    let parts = round_trials_chunked(plan, network, config, mode, |model, wr, rr, len| {
        let mut acc = Accumulator::default();
        for _ in 0..len {
            acc.push(model.trial(wr, rr).payoff);
        }
        acc
    })?;
    Ok(merge_all(&parts).scaled_report(rate, config.seed))
}

/// Individual trials behind [`round_oracle`], in trial order.
pub fn round_oracle_trials(plan: &MinerPlan, network: &NetworkParams, config: &SimConfig, mode: RewardMode) -> Result<Vec<RoundTrial>> {
    let parts = round_trials_chunked(plan, network, config, mode, |model, wr, rr, len| {
        (0..len).map(|_| model.trial(wr, rr)).collect::<Vec<_>>()
    })?;
    Ok(parts.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthPath {
    /// Total wealth (equipment value `γW` plus liquid reserve), starting at `W`.
    pub wealth: Vec<f64>,
    pub bankrupt: bool,
    pub bankrupt_epoch: Option<u64>,
    pub wins: u64,
}

/// Full-protocol wealth process with fixed equipment.
///
/// Each epoch the reserve pays `γWc_ec_r` and receives `M·v` with
/// `v ~ Poisson(E·q)`. The miner is bankrupt at the first epoch that ends
/// with the reserve exhausted (`≤ 0`).
pub fn simulate_wealth_path(plan: &MinerPlan, network: &NetworkParams, horizon: u64, config: &SimConfig) -> Result<WealthPath> {
    wealth_path(plan, network, horizon, &mut config.rng(0, 0), true)
}

fn wealth_path(plan: &MinerPlan, network: &NetworkParams, horizon: u64, rng: &mut SimRng, record: bool) -> Result<WealthPath> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "need at least one epoch"));
    }
    let wins_per_epoch = Poisson::new(network.expected_blocks * plan.win_probability(network));
    let equipment = plan.split * plan.wealth;
    let cost = plan.running_cost();
    // Reserve in epochs of running cost; with no wins it is exhausted at epoch ⌈t_max⌉.
    let runway = t_max(plan);
    let mut earned = 0.0;
    let mut wins = 0;
    let mut wealth = if record { vec![plan.wealth] } else { Vec::new() };
    for epoch in 1..=horizon {
        let v = wins_per_epoch.sample(rng);
        wins += v;
        earned += network.block_reward * v as f64;
        let remaining = runway + earned / cost - epoch as f64;
        if record {
            wealth.push(equipment + remaining.max(0.0) * cost);
        }
        if remaining <= 0.0 {
            return Ok(WealthPath { wealth, bankrupt: true, bankrupt_epoch: Some(epoch), wins });
        }
    }
    Ok(WealthPath { wealth, bankrupt: false, bankrupt_epoch: None, wins })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuinReport {
    /// Fraction of paths bankrupt within the horizon.
    pub ruin: SimReport,
    /// Fraction of paths without a single win within the horizon.
    pub no_win: SimReport,
}

/// Runs `config.sample_count` wealth paths of `horizon` epochs.
pub fn estimate_ruin(plan: &MinerPlan, network: &NetworkParams, horizon: u64, config: &SimConfig) -> Result<RuinReport> {
    config.check()?;
    let parts: Vec<Result<(Accumulator, Accumulator)>> = config
        .chunks()
        .into_par_iter()
        .map(|(chunk, len)| {
            let mut rng = config.rng(chunk, 0);
            let mut ruin = Accumulator::default();
            let mut no_win = Accumulator::default();
            for _ in 0..len {
                let path = wealth_path(plan, network, horizon, &mut rng, false)?;
                ruin.push(if path.bankrupt { 1.0 } else { 0.0 });
                no_win.push(if path.wins == 0 { 1.0 } else { 0.0 });
            }
            Ok((ruin, no_win))
        })
        .collect();
    let mut ruin = Accumulator::default();
    let mut no_win = Accumulator::default();
    for part in parts {
        let (r, n) = part?;
        ruin.merge(&r);
        no_win.merge(&n);
    }
    Ok(RuinReport { ruin: ruin.report(config.seed), no_win: no_win.report(config.seed) })
}

/// Wealth of a smooth-reward pool miner charged a continuous fee rate, stepped once per epoch:
/// `log W_{k+1} = log W_k + g_smooth - fee`.
pub fn simulate_pool_trajectory(wealth: f64, smooth_growth: f64, fee: f64, horizon: u64) -> Result<Vec<f64>> {
    ensure_positive("wealth", wealth)?;
    let mut log_wealth = wealth.ln();
    let mut path = Vec::with_capacity(horizon as usize + 1);
    path.push(wealth);
    for _ in 0..horizon {
        log_wealth += smooth_growth - fee;
        path.push(log_wealth.exp());
    }
    Ok(path)
}
