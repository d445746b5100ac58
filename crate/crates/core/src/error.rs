use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong inside the algorithmic core.
///
/// Variants are grouped by cause so the command-line front end can map them
/// onto distinct exit codes (data problems vs. parameter problems vs.
/// numerical failures).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("indicator {indicator} has no release on or before {first_date}")]
    Coverage { indicator: String, first_date: String },

    #[error("date coverage: {0}")]
    DateCoverage(String),

    #[error("no common trading dates; offending instruments: {}", .offending.join(", "))]
    Alignment { offending: Vec<String> },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("transform domain error in column {column}: ln argument {argument} is not positive")]
    TransformDomain { column: String, argument: f64 },

    #[error("{solver} did not converge after {iterations} iterations")]
    NoConvergence { solver: &'static str, iterations: usize },

    #[error("search failed: {0}")]
    Search(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }

    /// True for errors caused by the input data rather than the configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Coverage { .. }
                | Error::DateCoverage(_)
                | Error::Alignment { .. }
                | Error::InsufficientData(_)
                | Error::DegenerateData(_)
                | Error::TransformDomain { .. }
        )
    }
}
