use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("word letter {letter} out of range 1..={maps}")]
    InvalidWord { letter: usize, maps: usize },

    #[error("no open-set-condition set supplied")]
    MissingOscSet,

    #[error("budget exceeded: {what} needs {needed}, limit {limit}")]
    BudgetExceeded {
        what: &'static str,
        needed: f64,
        limit: f64,
    },

    #[error("measure has no atoms")]
    EmptyMeasure,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("atom {index} is not covered by any chart")]
    Coverage { index: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

/// Coarse error class, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Budget,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Validation(_)
            | Error::InvalidWord { .. }
            | Error::MissingOscSet
            | Error::EmptyMeasure
            | Error::Domain(_)
            | Error::Coverage { .. }
            | Error::Unsupported(_) => ErrorClass::Validation,
            Error::BudgetExceeded { .. } => ErrorClass::Budget,
            Error::Assembly(_) | Error::Numeric(_) => ErrorClass::Numeric,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::InvalidWord { .. } => "invalid_word",
            Error::MissingOscSet => "missing_osc_set",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::EmptyMeasure => "empty_measure",
            Error::Domain(_) => "domain",
            Error::Coverage { .. } => "coverage",
            Error::Unsupported(_) => "unsupported",
            Error::Assembly(_) => "assembly",
            Error::Numeric(_) => "numeric",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
