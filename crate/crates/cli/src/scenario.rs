//! Scenario files: flat `key = value` text with `#` comments, or a JSON object.

use std::path::Path;

use minerwealth::{CostModel, EpochSpec, MinerPlan, MinerShare, NetworkParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::CliError;

/// One run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Expected blocks per epoch.
    #[serde(rename = "E")]
    pub expected_blocks: f64,
    /// Reward per block.
    #[serde(rename = "M")]
    pub block_reward: f64,
    /// Baseline network power.
    #[serde(rename = "P0")]
    pub network_power: f64,
    #[serde(rename = "W")]
    pub wealth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub c_e: f64,
    pub c_r: f64,
    /// Smooth-reward payout period in epochs.
    pub tau: f64,
    /// Window length `N` in epochs.
    #[serde(alias = "N")]
    pub epochs: u64,
    /// Per-block win probability; overrides the value implied by `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Scenario(message.into())
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses JSON when the text starts with `{`, key-value text otherwise.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| invalid(format!("bad JSON scenario: {e}")))?
        } else {
            parse_key_values(text)?
        };
        let scenario: Scenario =
            serde_json::from_value(value).map_err(|e| invalid(format!("bad scenario: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("E", self.expected_blocks),
            ("P0", self.network_power),
            ("W", self.wealth),
            ("c_e", self.c_e),
            ("c_r", self.c_r),
            ("tau", self.tau),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.block_reward >= 0.0 && self.block_reward.is_finite()) {
            return Err(invalid(format!("M must be nonnegative and finite, got {}", self.block_reward)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(invalid(format!("gamma must lie in (0, 1), got {g}")));
            }
        }
        if let Some(q) = self.q {
            if !(0.0..=1.0).contains(&q) {
                return Err(invalid(format!("q must lie in [0, 1], got {q}")));
            }
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        Ok(())
    }

    pub fn network(&self) -> Result<NetworkParams, CliError> {
        Ok(NetworkParams::new(self.expected_blocks, self.block_reward, self.network_power)?)
    }

    pub fn costs(&self) -> Result<CostModel, CliError> {
        Ok(CostModel::new(self.c_e, self.c_r)?)
    }

    pub fn require_gamma(&self, command: &str) -> Result<f64, CliError> {
        self.gamma
            .ok_or_else(|| invalid(format!("`{command}` needs gamma in the scenario")))
    }

    pub fn plan(&self, command: &str) -> Result<MinerPlan, CliError> {
        Ok(MinerPlan::new(self.wealth, self.require_gamma(command)?, self.costs()?)?)
    }

    /// The explicit `q` if given, else the share bought with `gamma`.
    pub fn share(&self, command: &str) -> Result<MinerShare, CliError> {
        let network = self.network()?;
        let q = match self.q {
            Some(q) => q,
            None => self
                .plan(command)
                .map_err(|_| invalid(format!("`{command}` needs q or gamma in the scenario")))?
                .win_probability(&network),
        };
        Ok(MinerShare::from_probability(q, &network)?)
    }

    pub fn window(&self, command: &str) -> Result<Vec<EpochSpec>, CliError> {
        let count = usize::try_from(self.epochs).map_err(|_| invalid("epochs is too large"))?;
        Ok(EpochSpec::repeated(self.network()?, self.share(command)?, count))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("scenario serializes")
    }
}

fn parse_key_values(text: &str) -> Result<Value, CliError> {
    let mut map = Map::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("line {}: expected `key = value`", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let number = if let Ok(n) = value.parse::<u64>() {
            Number::from(n)
        } else {
            value
                .parse::<f64>()
                .ok()
                .and_then(Number::from_f64)
                .ok_or_else(|| invalid(format!("line {}: `{key}` is not a finite number", lineno + 1)))?
        };
        if map.insert(key.to_string(), Value::Number(number)).is_some() {
            return Err(invalid(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
    }
    Ok(Value::Object(map))
}
