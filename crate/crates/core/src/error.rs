use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Which dataset a risk or trainer expected a column on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Role {
    /// Observed positives mixed with unlabeled rows, `(W, X)`.
    PositiveUnlabeled,
    /// Exposure-labelled rows, `(E, X)`.
    Exposure,
    /// Positive-only rows, `X ~ ζ(x | w = 1)`.
    Positive,
    /// Unlabeled rows, `X ~ ζ(x)`.
    Unlabeled,
    /// Rows carrying both `W` and `E`.
    SemiSupervised,
    /// Held-out evaluation rows.
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::PositiveUnlabeled => "D^PU",
            Role::Exposure => "D^E",
            Role::Positive => "D^P",
            Role::Unlabeled => "D^U",
            Role::SemiSupervised => "D^SSE",
            Role::Test => "test",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    W,
    E,
    YOracle,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Column::W => "w",
            Column::E => "e",
            Column::YOracle => "y_oracle",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum PueError {
    #[error("dataset {role} is missing column `{column}`")]
    MissingColumn { role: Role, column: Column },

    #[error("dataset {0} was required but not supplied")]
    MissingDataset(Role),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("degenerate subset: {0}")]
    DegenerateSubset(String),

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("recursion diverges: {0}")]
    Divergence(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: feature index {index} exceeds declared dimension {dim}")]
    Dimension {
        line: usize,
        index: usize,
        dim: usize,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("not enough rows: {0}")]
    Size(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{failed} of {total} trials failed (limit is 10%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PueError>;
