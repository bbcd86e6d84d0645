use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by matrix construction, spectral estimation, the
/// iteration engine, the analysis checks, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,

    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("system matrix must have at least as many rows as columns (got {rows}x{cols})")]
    Underdetermined { rows: usize, cols: usize },

    #[error("row {0} has zero norm; the projection step divides by the squared row norm")]
    ZeroRow(usize),

    #[error(
        "right-hand side is inconsistent with the supplied solution: \
         ||A*truth - b|| = {residual:.3e} exceeds {limit:.3e}"
    )]
    InconsistentTruth { residual: f64, limit: f64 },

    #[error(
        "power iteration did not converge within {iterations} iterations \
         (last estimate {last_estimate:.6e})"
    )]
    PowerIterationStalled { iterations: usize, last_estimate: f64 },

    #[error("matrix is rank deficient to working precision")]
    RankDeficient,

    #[error("full decomposition is capped at {cap} columns (got {cols}); use the estimators")]
    SvdSizeCap { cols: usize, cap: usize },

    #[error("singular values are not available; compute the full decomposition first")]
    MissingSingularValues,

    #[error("stopping rule requires a known solution")]
    TruthRequired,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
