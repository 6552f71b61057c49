use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the clustering / optimization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("column `{0}` not present in input header")]
    MissingColumn(String),

    #[error("zero parseable rows ({skipped} skipped)")]
    ZeroParseableRows { skipped: usize },

    #[error("no demographic survives the weight threshold {threshold}")]
    NothingSurvivesThreshold { threshold: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("undefined distance: {0}")]
    UndefinedDistance(&'static str),

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("evaluation failed at k={k}, alpha={alpha}: {source}")]
    Evaluation {
        k: usize,
        alpha: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at(self, k: usize, alpha: f64) -> Self {
        Error::Evaluation {
            k,
            alpha,
            source: Box::new(self),
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
