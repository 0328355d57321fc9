use std::path::PathBuf;

use crate::techlib::MemoryKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("field `{0}` must be strictly positive")]
    NonPositiveValue(String),

    #[error("unknown memory kind `{0}` (expected SRAM, STT_MRAM or SOT_MRAM)")]
    UnknownMemoryKind(String),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("no cache organization satisfies the bounds for a capacity of {capacity} bytes")]
    InfeasibleCapacity { capacity: u64 },

    #[error("infeasible organization: {0}")]
    InfeasibleOrganization(String),

    #[error("calibration diverged: max relative error {max_error:.4} exceeds ceiling {ceiling:.4}")]
    CalibrationDiverged {
        max_error: f64,
        ceiling: f64,
        residuals: Vec<(String, f64)>,
    },

    #[error("capacity mismatch: {kind} design is {capacity} bytes, baseline is {baseline} bytes")]
    CapacityMismatch {
        kind: MemoryKind,
        capacity: u64,
        baseline: u64,
    },

    #[error("schema error at row {row}, column `{column}`: {reason}")]
    SchemaError {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("negative count at row {row}, column `{column}`")]
    NegativeCount { row: usize, column: String },

    #[error("malformed trace record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("baseline configuration produced no DRAM traffic")]
    NoBaseTraffic,

    #[error("no {kind} capacity fits within {budget:.4} mm2")]
    NoFeasibleCapacity { kind: MemoryKind, budget: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
