use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller misuse: bad index, too few nodes, malformed sweep.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("time {t} outside range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    /// The metric denominator r² + a² − 2GMr/c² vanishes.
    #[error("coordinate singularity at r = {r}: r² + a² − 2GMr/c² = {delta:e} (horizon condition)")]
    Horizon { r: f64, delta: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// A quantity that must vanish by construction did not.
    #[error("consistency error: {0}")]
    Consistency(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
