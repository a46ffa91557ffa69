use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A factorization pivot fell below the rank tolerance.
    #[error("matrix is rank-deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric cell at data row {row}, column `{column}`")]
    NonNumericCell { row: usize, column: String },

    #[error("role conflict: {0}")]
    RoleConflict(String),

    #[error("file contains no data")]
    EmptyFile,

    /// A residual variance is zero (up to rounding), so the statistics are undefined.
    #[error("degenerate residual variance: {0}")]
    DegenerateVariance(&'static str),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
