use thiserror::Error;

/// Errors raised by the solvers, simulators and model constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model value (source, channel, partition) failed validation.
    #[error("invalid model: {0}")]
    InvalidModel(String),
    /// An argument broke an operation's contract (negative power, rank out of range, ...).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A precondition on the model combination does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A root search or quadrature did not reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Stochastic calibration of a strategy multiplier failed.
    #[error("calibration failed: {0}")]
    Calibration(String),
    /// Two estimates that must agree did not.
    #[error("validation failed: {0}")]
    Validation(String),
    /// Configuration text could not be parsed.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
