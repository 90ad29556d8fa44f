use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("rank deficient matrix (sigma_min / sigma_max = {0:.3e})")]
    RankDeficient(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no progress: {0}")]
    NoProgress(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by invalid caller input rather than runtime
    /// failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Domain(_) | Error::Json(_) => true,
            Error::Trial { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
