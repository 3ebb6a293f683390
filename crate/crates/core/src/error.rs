use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("value {value} outside [{lower}, {upper}]")]
    Range { value: f64, lower: f64, upper: f64 },

    #[error("non-finite output from `{coefficient}` at {context}")]
    Evaluation {
        coefficient: &'static str,
        context: String,
    },

    #[error("start point {x0:?} is outside the domain")]
    StartOutsideDomain { x0: Vec<f64> },

    #[error("start point {x0:?} lies within the boundary shift (width {shift}) of the domain")]
    StartInsideShift { x0: Vec<f64>, shift: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{context}: {source}")]
    Step {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Wraps the error with the step at which it occurred.
    pub fn at(self, context: impl Into<String>) -> Self {
        Error::Step {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with step context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the failure stems from configuration or I/O rather than
    /// numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidParameter { .. }
                | Error::Config(_)
                | Error::StartOutsideDomain { .. }
                | Error::StartInsideShift { .. }
                | Error::Range { .. }
                | Error::Shape(_)
                | Error::Misuse(_)
                | Error::Io { .. }
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
