use thiserror::Error;

/// Largest number of binary variables whose states are enumerated exactly.
pub const MAX_BINARY: usize = 20;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{q} binary variables would require enumerating 2^{q} states (limit is {MAX_BINARY})")]
    Capacity { q: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("schema error: {0}")]
    Schema(String),

    /// `row` is 1-based, counting data rows only.
    #[error("no observed cells in row {row}")]
    NoObservedCells { row: usize },

    #[error("correlation undefined for variable {index}: zero variance")]
    DegenerateCorrelation { index: usize },

    #[error("binary column '{name}' is constant across observed cells")]
    ConstantBinaryColumn { name: String },

    #[error("latent dimension {p_z} out of range 1..={max}")]
    LatentDimOutOfRange { p_z: usize, max: usize },

    #[error("all {restarts} restarts failed: {diagnostics}")]
    AllRestartsFailed { restarts: usize, diagnostics: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
