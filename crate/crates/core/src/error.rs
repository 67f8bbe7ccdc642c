use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library. Row and column indices are 1-based data
/// rows (the header is not counted) and 0-based column positions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("malformed number at row {row}, column {col}: `{value}`")]
    MalformedNumber { row: usize, col: usize, value: String },

    #[error("duplicate block-group id `{0}`")]
    DuplicateId(String),

    #[error("length mismatch at row {row}: {detail}")]
    LengthMismatch { row: usize, detail: String },

    #[error("domain violation at row {row}: {detail}")]
    DomainViolation { row: usize, detail: String },

    #[error("nonpositive consumption in month {month}")]
    NonpositiveConsumption { month: usize },

    #[error("pattern sum is not positive ({0})")]
    NonpositiveSum(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zone {0} has no members")]
    EmptyZone(usize),

    #[error("zone {zone} has {members} members, at least {required} required")]
    ZoneTooSmall {
        zone: usize,
        members: usize,
        required: usize,
    },

    #[error("too few rows: need at least {required}, found {found}")]
    TooFewRows { required: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel matrix is not positive definite even with jitter {jitter:e}")]
    SingularKernel { jitter: f64 },

    #[error("degenerate regressor: x has zero variance")]
    DegenerateX,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("component index {index} out of range (have {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("every EM restart collapsed to a zero-variance expert")]
    Degenerate,

    #[error("unknown block-group id `{0}`")]
    UnknownId(String),

    #[error("config error: {0}")]
    Config(String),
}
