use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Bad input: files, shapes, labels, parameters.
    Data,
    /// A numerical routine failed on otherwise valid input.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unparseable cell {value:?} at line {line}, field {field}")]
    Parse {
        line: usize,
        field: usize,
        value: String,
    },
    #[error("ragged row at line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("label/sample count mismatch: {samples} samples, {labels} labels")]
    CountMismatch { samples: usize, labels: usize },
    #[error("class {0} has no members")]
    EmptyClass(usize),
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("missing values not supported: {0}")]
    MissingValues(String),
    #[error("non-finite observed value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("empty filter result: no gene passed the filter")]
    EmptyFilter,
    #[error("nonpositive value {value} at ({row}, {col}) cannot be log transformed")]
    NonPositive { row: usize, col: usize, value: f64 },
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("rank-deficient design: dependent columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },
    #[error("singular covariance matrix ({0}); set a positive ridge")]
    SingularCovariance(String),
    #[error("no gene relates to the response: all slopes are zero")]
    NoSignal,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed model file at line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::RankDeficient { .. }
            | Error::SingularCovariance(_)
            | Error::Numerical(_)
            | Error::NoSignal => Category::Numerical,
            Error::Fold { source, .. } => source.category(),
            _ => Category::Data,
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Error {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}
