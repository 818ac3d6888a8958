use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("x = {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("no design point within bandwidth {bandwidth} of x0 = {x0}")]
    NoLocalSupport { x0: f64, bandwidth: f64 },

    #[error("domain-structured validation needs at least 2 realizations, found {found}")]
    NeedsMultipleDomains { found: usize },

    #[error("weight cell ({row}, {col}) underflowed to zero on {attempts} consecutive draws")]
    DegenerateWeights { row: usize, col: usize, attempts: usize },

    #[error("expected a {expected} realization")]
    WrongVariant { expected: &'static str },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("{failed} of {total} local fits had no support (limit 1%)")]
    TooManyFailedFits { failed: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
