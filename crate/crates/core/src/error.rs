use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced by ingestion, estimation and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// A malformed input row (bad field, bad timestamp, non-binary state).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally complete input that violates a dataset invariant,
    /// e.g. a partially observed day.
    #[error("integrity error for appliance '{appliance}'{}: {message}", fmt_date(.date))]
    Integrity {
        appliance: String,
        date: Option<NaiveDate>,
        message: String,
    },

    /// An estimator was invoked on data it cannot be computed from.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Invalid configuration (bad partition, missing profile, missing wattage).
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn fmt_date(date: &Option<NaiveDate>) -> String {
    match date {
        Some(d) => format!(" on {d}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
