//! Reward distributions, waiting times and time-average growth rates for
//! proof-of-work style miners, with Monte Carlo oracles.

pub mod error;
pub mod growth;
pub mod mcsim;
pub mod numerics;
pub mod rewarddist;
pub mod specfun;
pub mod waiting;

pub use error::{Error, Result};
pub use growth::{CostModel, MinerPlan, OptimizerConfig};
pub use rewarddist::{EpochSpec, LatticePmf, MinerShare, NetworkParams};
pub use waiting::{BankruptcyInputs, WaitParams};

/// Crate version, echoed in every CLI output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
