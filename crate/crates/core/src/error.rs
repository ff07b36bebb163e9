use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Legs out of order on a path: entry after exit, or overlapping legs.
    #[error("structural error on path {path}, leg {leg}: {detail}")]
    Structure { path: usize, leg: usize, detail: String },

    /// A weight or event needs information not yet available at its anchor time.
    #[error("adaptedness violation on path {path}, leg {leg}: {detail}")]
    Adaptedness { path: usize, leg: usize, detail: String },

    #[error("shortsale constraint violated on path {path}, leg {leg}: weight {weight}")]
    Constraint { path: usize, leg: usize, weight: String },

    #[error("refused: {0}")]
    Refused(String),

    #[error("enumeration budget exceeded: {needed} candidates needed, budget is {budget}")]
    Budget { needed: u128, budget: u128 },

    /// Scenario file problem, with a 1-based line number.
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}
