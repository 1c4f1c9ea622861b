use thiserror::Error;

use crate::model::Scenario;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or structurally inconsistent.
    /// `key` is the dotted path of the offending field.
    #[error("invalid config at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("operation `{op}` requires {expected}, got {actual}")]
    Scenario {
        op: &'static str,
        expected: &'static str,
        actual: Scenario,
    },

    /// The steady-state system (or a closed-form denominator) is singular
    /// to working precision.
    #[error("degenerate input in {context}: |det| = {det:.3e} below threshold")]
    Singular { context: &'static str, det: f64 },

    #[error("dynamics are not decaying (eigenvalue real part {growth:.3e} >= 0)")]
    Unstable { growth: f64 },

    #[error("time-domain integration did not settle after {steps} steps (last change {change:.3e})")]
    NotConverged { steps: usize, change: f64 },

    #[error("{0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
