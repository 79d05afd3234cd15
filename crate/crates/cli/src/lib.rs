//! Command-line front end for the `minerwealth` engine.

pub mod commands;
pub mod output;
pub mod scenario;
pub mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use scenario::Scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONVERGENCE: i32 = 2;
pub const EXIT_NO_ROOT: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Scenario(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Engine(#[from] minerwealth::Error),
    #[error("{0} oracle check(s) failed")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use minerwealth::Error as E;
        match self {
            CliError::Scenario(_) | CliError::Io(_) => EXIT_VALIDATION,
            CliError::VerifyFailed(_) => EXIT_VERIFY_FAILED,
            CliError::Engine(e) => match e {
                E::Convergence { .. } | E::Overflow(_) => EXIT_CONVERGENCE,
                E::NoViableStrategy(_) | E::NoRoot(_) => EXIT_NO_ROOT,
                E::InvalidParameter { .. }
                | E::Domain(_)
                | E::CertainRuin(_)
                | E::Degenerate(_)
                | E::UnsupportedLattice { .. } => EXIT_VALIDATION,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        use minerwealth::Error as E;
        match self {
            CliError::Scenario(_) => "scenario",
            CliError::Io(_) => "io",
            CliError::VerifyFailed(_) => "verify_failed",
            CliError::Engine(e) => match e {
                E::InvalidParameter { .. } => "invalid_parameter",
                E::Domain(_) => "domain",
                E::Overflow(_) => "overflow",
                E::CertainRuin(_) => "certain_ruin",
                E::Degenerate(_) => "degenerate",
                E::UnsupportedLattice { .. } => "unsupported_lattice",
                E::Convergence { .. } => "convergence",
                E::NoViableStrategy(_) => "no_viable_strategy",
                E::NoRoot(_) => "no_root",
            },
        }
    }

    /// `error code=<n> kind=<kind> message=<JSON string>` on one line.
    pub fn diagnostic(&self) -> String {
        let message = serde_json::Value::String(self.to_string()).to_string();
        format!("error code={} kind={} message={message}", self.exit_code(), self.kind())
    }
}

#[derive(Debug, Parser)]
#[command(name = "minerwealth", version, about = "Reward distributions and growth rates for stochastic block rewards")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file (`key = value` lines or JSON).
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = minerwealth::growth::DEFAULT_QUAD_TOL)]
    pub quad_tol: f64,
    /// Split grid size for the optimizer.
    #[arg(long, default_value_t = minerwealth::growth::DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Oracle {
    Round,
    RoundSampled,
    FirstWin,
    TotalReward,
    Ruin,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reward pmf over the window and its moments.
    Dist(Common),
    /// First-win CDF/PDF grid, mean wait and bankruptcy probability.
    Wait {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1440.0)]
        x_max: f64,
        #[arg(long, default_value_t = 1.0)]
        x_step: f64,
    },
    /// Stochastic and smooth growth rates at the scenario's gamma.
    Growth(Common),
    /// Growth-optimal split, optionally with the break-even wealth.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Also solve for the minimum viable wealth.
        #[arg(long)]
        w_min: bool,
    },
    /// Maximum pool fee.
    Fee(Common),
    /// Monte Carlo estimate.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Oracle::Round)]
        oracle: Oracle,
        /// Also write per-trial outcomes (round and first-win oracles).
        #[arg(long)]
        trials: bool,
    },
    /// Closed-form-vs-Monte-Carlo oracle suite.
    Verify(Common),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Dist(_) => "dist",
            Command::Wait { .. } => "wait",
            Command::Growth(_) => "growth",
            Command::Optimize { .. } => "optimize",
            Command::Fee(_) => "fee",
            Command::Simulate { .. } => "simulate",
            Command::Verify(_) => "verify",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Dist(c) | Command::Growth(c) | Command::Fee(c) | Command::Verify(c) => c,
            Command::Wait { common, .. } | Command::Optimize { common, .. } | Command::Simulate { common, .. } => common,
        }
    }
}

/// Runs one command; returns the paths written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let common = cli.command.common();
    let scenario = Scenario::load(&common.scenario)?;
    if !(common.quad_tol > 0.0) {
        return Err(CliError::Scenario(format!("--quad-tol must be positive, got {}", common.quad_tol)));
    }
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", common.out.display())))?;
    commands::dispatch(&cli.command, &scenario)
}
