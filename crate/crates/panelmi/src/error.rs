//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by dataset construction, samplers, chains, and reports.
#[derive(Debug, Error)]
pub enum Error {
    /// A cell value is outside its variable's level range, or a schema file
    /// is internally inconsistent.
    #[error("schema mismatch at row {row}, column {column}: {detail}")]
    SchemaMismatch {
        row: usize,
        column: String,
        detail: String,
    },

    /// The schema itself is invalid (bad ordering, duplicate names, d_j < 2).
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    /// A value is present where the panel/refreshment design forces
    /// missingness (or vice versa).
    #[error("structural violation at row {row}, column {column}: {detail}")]
    StructuralViolation {
        row: usize,
        column: String,
        detail: String,
    },

    /// CSV cell could not be parsed.
    #[error("parse error at row {row}, column {column}: {detail}")]
    Parse {
        row: usize,
        column: String,
        detail: String,
    },

    #[error("all categorical weights are zero")]
    AllZeroWeights,

    #[error("non-finite categorical weight")]
    NonFiniteWeight,

    #[error("Dirichlet concentration parameters must be positive")]
    NonPositiveAlpha,

    #[error("all log-weights are -inf")]
    AllNegInfinite,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate initialization: {0}")]
    DegenerateInit(String),

    #[error("infeasible schedule: {0}")]
    ScheduleInfeasible(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("empty input")]
    EmptyInput,

    #[error("empty subgroup: {0}")]
    EmptySubgroup(String),

    #[error("unknown variable: {0}")]
    UnknownVariable(String),

    #[error("no complete cases in panel")]
    NoCompleters,

    #[error("numerical underflow: {0}")]
    NumericalUnderflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
