use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violated the documented precondition of an operation.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The function is undefined at the requested argument.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    /// A logarithm argument is nonpositive with positive probability,
    /// so the growth rate is minus infinity.
    #[error("certain ruin: {0}")]
    CertainRuin(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("multi-epoch lattice requires a common block reward (got {first} and {other}); use the Monte Carlo estimator instead")]
    UnsupportedLattice { first: f64, other: f64 },

    /// An iterative scheme stopped before reaching its tolerance.
    #[error("no convergence: {what} (best estimate {estimate}, achieved error {achieved_error})")]
    Convergence {
        what: String,
        estimate: f64,
        achieved_error: f64,
    },

    #[error("no viable strategy: {0}")]
    NoViableStrategy(String),

    #[error("no root: {0}")]
    NoRoot(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects non-finite or nonpositive values.
pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {value}")))
    }
}

pub(crate) fn ensure_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be nonnegative and finite, got {value}")))
    }
}

pub(crate) fn ensure_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in [0, 1], got {value}")))
    }
}
