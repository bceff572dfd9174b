use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error at row {row}, column {column}: {message}")]
    Format {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("scale-invariant error is undefined for a zero reference vector")]
    UndefinedMetric,

    #[error(
        "equality constraints are inconsistent (residual {residual:.3e} > {threshold:.3e}); \
         the data look noisy, use the bounded or penalized variant"
    )]
    Infeasible { residual: f64, threshold: f64 },

    #[error(
        "constraint matrix has rank {rank} < {columns} columns; linear recovery is not unique"
    )]
    NotRecoverable { rank: usize, columns: usize },

    #[error("lambda search found no rank-1 solution after {steps} steps")]
    SearchFailed {
        steps: usize,
        trace: Vec<crate::solver::SweepStep>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
