use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level {level} exceeds the supremum {sup} of the truncated mean")]
    UnreachableLevel { level: f64, sup: f64 },

    #[error("stored point count {stored} exceeds the configured cap {cap}")]
    BudgetExceeded { stored: usize, cap: usize },

    #[error("intensity height {height} exceeds the hard cap {cap}")]
    HeightRunaway { height: f64, cap: f64 },

    #[error("grid steps differ: {left} vs {right}")]
    StepMismatch { left: f64, right: f64 },

    #[error("partial sums of the symmetrized renewal measure did not settle after {terms} terms (last relative increment {increment:e})")]
    Divergent { terms: usize, increment: f64 },

    #[error("event count {events} exceeds the explosion cap {cap}")]
    Explosion { events: u64, cap: u64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid config field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
