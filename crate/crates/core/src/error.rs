use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("dates out of order at row {row}: {date} does not follow {previous}")]
    Order {
        row: usize,
        date: NaiveDate,
        previous: NaiveDate,
    },

    #[error("cannot forward-fill ticker {ticker}: first row is missing")]
    Unfillable { ticker: String },

    #[error("missing close for ticker {ticker} at {date}")]
    MissingValue { ticker: String, date: NaiveDate },

    #[error("split error: {0}")]
    Split(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("sharpe ratio undefined for zero volatility")]
    UndefinedSharpe,

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid portfolio: {0}")]
    InvalidPortfolio(String),

    #[error("invalid hyperparameter {name}: {message}")]
    Hyperparam { name: &'static str, message: String },

    #[error(
        "training diverged at update step {step}{}: loss is not finite",
        episode.map(|e| format!(" (episode {e})")).unwrap_or_default()
    )]
    Divergence { episode: Option<usize>, step: usize },

    #[error("model format error at line {line}: {message}")]
    Model { line: usize, message: String },

    #[error("{0}")]
    Invalid(String),
}
