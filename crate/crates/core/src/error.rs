use std::path::PathBuf;

/// Errors produced by the estimation and prediction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain of a function or type.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Cholesky pivot was not strictly positive.
    ///
    /// `tile` is the diagonal tile index and `pivot` the row within that tile.
    #[error("matrix is not positive definite (tile {tile}, pivot {pivot}); consider adding a nugget")]
    NotPositiveDefinite { tile: usize, pivot: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A singular value decomposition did not converge.
    #[error("low-rank compression failed: {0}")]
    Compression(String),

    /// A likelihood evaluation failed at `theta`.
    #[error("likelihood evaluation failed at theta={theta:?}: {source}")]
    Likelihood {
        theta: [f64; 3],
        #[source]
        source: Box<Error>,
    },

    /// Every likelihood evaluation of an optimization run failed.
    #[error("optimization failed: no finite likelihood evaluation (last theta tried: {last_theta:?})")]
    NoFiniteEvaluation { last_theta: [f64; 3] },

    /// Malformed user input (files, configuration, flags).
    #[error("{0}")]
    Input(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Likelihood { source, .. } => source.is_numerical(),
            Error::NotPositiveDefinite { .. } | Error::Compression(_) | Error::NoFiniteEvaluation { .. } => {
                true
            }
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
