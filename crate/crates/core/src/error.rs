use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains no data")]
    EmptyInput,

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("row {line} has {found} fields, expected {expected}")]
    RaggedRow {
        line: usize,
        found: usize,
        expected: usize,
    },

    #[error("cannot parse {token:?} at row {line}, column {col} as a number")]
    NonNumeric {
        line: usize,
        col: usize,
        token: String,
    },

    #[error("insufficient length: need more than {needed} observations, got {got}")]
    InsufficientLength { needed: usize, got: usize },

    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("invalid bandwidth: {0}")]
    InvalidBandwidth(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("auto-spectrum of series {series} is {value:e} at omega={omega}, not positive")]
    NonPositiveAutoSpectrum {
        series: usize,
        omega: f64,
        value: f64,
    },

    #[error("non-stationary model: {0}")]
    NonStationary(String),

    #[error("hypothesis {id}: {source}")]
    Hypothesis {
        id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input or configuration rather than a
    /// runtime failure (I/O and similar).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Csv(_) => false,
            Error::Hypothesis { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}
