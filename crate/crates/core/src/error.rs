use thiserror::Error;

/// Errors raised by the downselection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value {0} is outside the Likert range [1, 5]")]
    OutOfRange(f64),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("infeasible moments: mean {mean}, variance {variance}")]
    InfeasibleMoments { mean: f64, variance: f64 },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("enumeration of C({n}, {l}) = {count} tuples exceeds the cap of {cap}")]
    CapExceeded { n: usize, l: usize, count: u128, cap: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("duplicate key: {0}")]
    DuplicateKey(String),

    #[error("schema error in {file}: {message}")]
    Schema { file: String, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn schema(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { file: file.into(), message: message.into() }
    }
}
