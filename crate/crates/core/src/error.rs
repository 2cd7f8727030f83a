use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("density has zero mass")]
    ZeroMass,

    #[error("expected a unit-mass density, found mass {0}")]
    Unnormalized(f64),

    #[error("invalid dyad (x1={x1}, x2={x2}, b={b}): need 0 <= x1 < b < x2")]
    InvalidDyad { x1: f64, x2: f64, b: f64 },

    #[error("invalid budget distribution: {0}")]
    InvalidDistribution(String),

    /// Negative discriminant, unreachable mean or similar breakdown while
    /// filling a group. `group` is the 0-based entry index when known.
    #[error("numerical failure{}: {reason}", group.map(|g| format!(" in group {g}")).unwrap_or_default())]
    Numerical { group: Option<usize>, reason: String },

    #[error("invalid dice: {0}")]
    InvalidDice(String),

    #[error("cannot rewire: {0}")]
    Rewire(String),

    #[error("unknown output format `{0}`")]
    UnknownFormat(String),
}

impl Error {
    pub(crate) fn numerical(reason: impl Into<String>) -> Self {
        Error::Numerical {
            group: None,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_group(self, index: usize) -> Self {
        match self {
            Error::Numerical { group: None, reason } => Error::Numerical {
                group: Some(index),
                reason,
            },
            other => other,
        }
    }
}
