use crate::loss::LossBreakdown;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("edge {index}: node id {node} out of range for {num_nodes} nodes")]
    NodeOutOfRange {
        index: usize,
        node: u32,
        num_nodes: usize,
    },

    #[error("edge {index}: self-loop ({node}, {node}) not allowed")]
    SelfLoop { index: usize, node: u32 },

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("labels missing: {0}")]
    MissingLabels(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checksum mismatch in {path}: file is corrupt or was tampered with")]
    ChecksumMismatch { path: String },

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence {
        epoch: usize,
        reason: String,
        history: Vec<LossBreakdown>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidParameter(_) => 2,
            Error::Divergence { .. } | Error::NonFinite(_) => 4,
            _ => 3,
        }
    }
}
