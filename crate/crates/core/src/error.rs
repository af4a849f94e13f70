//! Shared error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Evaluation outside the represented domain. Never extrapolated.
    #[error("evaluation point {x} outside [0, {max}]")]
    OutOfDomain { x: f64, max: f64 },

    /// Index past the configured horizon.
    #[error("horizon exceeded: n={n} > {max}")]
    HorizonExceeded { n: u64, max: u64 },

    /// Exact sum law grew past the configured support cap.
    #[error("support cap exceeded: {support} points > cap {cap}")]
    SupportCapExceeded { support: usize, cap: usize },

    /// Full path enumeration requested past the configured threshold.
    #[error("enumeration threshold exceeded: n={n} > {max}")]
    EnumerationCapExceeded { n: u64, max: u64 },

    /// A construction has no admissible starting point within the horizon.
    #[error("infeasible within horizon: {0}")]
    Infeasible(String),

    /// Regime/parameter combination not covered by any implemented result.
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    /// Input failed validation.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A threshold scan found no point after which the defining inequality
    /// persists through the horizon.
    #[error("threshold scan failed: {0}")]
    ScanFailed(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
