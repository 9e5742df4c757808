use thiserror::Error;

/// Broad classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The caller asked for something invalid (bad parameter, bad index set).
    Usage,
    /// The input data violate a precondition.
    Data,
    /// A numerical procedure could not produce a result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum CodaError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("negative value {value} at row {row}, column {column}")]
    NegativeCell {
        row: usize,
        column: usize,
        value: f64,
    },

    #[error("duplicate part label {0:?}")]
    DuplicatePartLabel(String),

    #[error("response column {0:?} not found in header")]
    MissingResponseColumn(String),

    #[error("response column holds {found} distinct values, expected exactly two")]
    InvalidResponse { found: usize },

    #[error("row {row} ({label}) has zero total")]
    ZeroRowSum { row: usize, label: String },

    #[error(
        "zero entry at row {row}, column {column} ({part}); logratios need strictly positive data"
    )]
    ZeroEntry {
        row: usize,
        column: usize,
        part: String,
    },

    #[error("part {part:?} is zero in every sample")]
    ZeroColumn { part: String },

    #[error("matrix must have at least {min_rows} rows and {min_cols} columns, got {rows}x{cols}")]
    TooSmall {
        rows: usize,
        cols: usize,
        min_rows: usize,
        min_cols: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in input matrix at ({row}, {column})")]
    NonFinite { row: usize, column: usize },

    #[error("collinear predictor columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("response has a single class; both classes are required")]
    SingleClass,

    #[error("configuration has zero total sum of squares after centering")]
    ZeroConfiguration,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CodaError {
    pub fn kind(&self) -> ErrorKind {
        use CodaError::*;
        match self {
            InvalidArgument(_) | DimensionMismatch { .. } => ErrorKind::Usage,
            NonFinite { .. } | RankDeficient { .. } | ZeroConfiguration | Numerical(_) => {
                ErrorKind::Numerical
            }
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, CodaError>;
