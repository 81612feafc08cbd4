use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("malformed manifest {}: {reason}", path.display())]
    Manifest { path: PathBuf, reason: String },

    #[error("invalid table `{table}`: {reason}")]
    InvalidTable { table: String, reason: String },

    #[error("unsupported table format: {}", .0.display())]
    UnsupportedFormat(PathBuf),

    #[error("boundary count: quartile tasks need exactly 3 boundaries, got {0}")]
    BoundaryCount(usize),

    #[error("quartile boundaries must be finite and ascending")]
    BoundaryOrder,

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("label set does not match task type: {0}")]
    LabelSet(String),

    #[error("duplicate row_id {0}")]
    DuplicateRowId(u64),

    #[error("label `{label}` is not in the task's label set ({context})")]
    UnknownLabel { label: String, context: String },

    #[error("prediction file line {line}: {reason}")]
    PredictionRecord { line: usize, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {0} truth labels vs {1} predictions")]
    LengthMismatch(usize, usize),

    #[error("degenerate agreement: chance agreement is 1 but observed agreement is not")]
    DegenerateAgreement,

    #[error("zero within-group variance")]
    ZeroWithinGroupVariance,

    #[error("degenerate variance: both groups are constant")]
    DegenerateVariance,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate target: all values are equal")]
    DegenerateTarget,

    #[error("non-finite value")]
    NonFinite,

    #[error("bin index {0} out of range (0..=3)")]
    BinIndex(usize),

    #[error("reference accuracy must be positive")]
    ZeroReference,

    #[error("coverage mismatch: {0}")]
    CoverageMismatch(String),

    #[error("dataset `{0}` has no task type")]
    UnknownTaskType(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures caused by malformed or inconsistent inputs, as
    /// opposed to computations that are undefined on otherwise valid inputs.
    pub fn is_input(&self) -> bool {
        !matches!(
            self,
            Error::DegenerateAgreement
                | Error::ZeroWithinGroupVariance
                | Error::DegenerateVariance
                | Error::DegenerateTarget
                | Error::ZeroReference
                | Error::InsufficientData(_)
        )
    }
}
