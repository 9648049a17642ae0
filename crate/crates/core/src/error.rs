//! Crate-wide error type.

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line} of {path}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("duplicate record for ({date}, {product}, {warehouse}) at line {line}")]
    DuplicateRecord {
        date: NaiveDate,
        product: String,
        warehouse: String,
        line: u64,
    },

    #[error("cannot impute prices for ({product}, {warehouse}): no observed price in the fit range")]
    ImputationImpossible { product: String, warehouse: String },

    #[error("series ({product}, {warehouse}) too short: {len} working days (need at least {min})")]
    TooShortSeries {
        product: String,
        warehouse: String,
        len: usize,
        min: usize,
    },

    #[error("series ({product}, {warehouse}) skips working day {date}; records must cover consecutive open days")]
    NonConsecutiveSeries {
        product: String,
        warehouse: String,
        date: NaiveDate,
    },

    #[error("{date} is a Sunday; the working week runs Monday through Saturday")]
    InvalidWeekday { date: NaiveDate },

    #[error("cannot fit a scaler on an empty row set")]
    EmptyFit,

    #[error("column mismatch: {message}")]
    Schema { message: String },

    #[error("series spans {months} months; chronological split needs more than {required}")]
    SplitTooShort { months: u32, required: u32 },

    #[error("split produced an empty {which} interval")]
    EmptySplit { which: &'static str },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("all {n_trials} search trials diverged")]
    SearchFailed { n_trials: usize },

    #[error("empty input: {context}")]
    EmptyInput { context: &'static str },

    #[error("length mismatch: {left} vs {right} ({context})")]
    LengthMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    #[error("misaligned series: {message}")]
    Alignment { message: String },

    #[error("spearman correlation undefined: {context}")]
    UndefinedCorrelation { context: &'static str },

    #[error("invalid configuration: {message}")]
    Config { message: String },

    #[error("model file error: {message}")]
    ModelFormat { message: String },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Error::Config {
            message: message.into(),
        }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Error::Schema {
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Schema { .. } | Error::Parse { .. }
        )
    }
}
