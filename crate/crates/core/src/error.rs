use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input to a library call (bad qubit index, shape mismatch).
    Structural,
    /// Out-of-range parameter or inconsistent configuration.
    Config,
    /// Unreadable or malformed dataset.
    Data,
    /// Solver or simulator produced something it should not have.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("gate acts on qubit {0} more than once")]
    RepeatedQubit(usize),

    #[error("register size {0} outside the supported range 1..=12")]
    RegisterSize(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{}:{row}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::QubitOutOfRange { .. }
            | Error::RepeatedQubit(_)
            | Error::RegisterSize(_)
            | Error::DimensionMismatch { .. } => ErrorKind::Structural,
            Error::Invalid(_) | Error::Json(_) => ErrorKind::Config,
            Error::Parse { .. } | Error::File { .. } | Error::Io(_) | Error::Csv(_) => {
                ErrorKind::Data
            }
            Error::Degenerate(_) | Error::Numerical(_) => ErrorKind::Numerical,
        }
    }

    /// Exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config | ErrorKind::Structural => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

pub(crate) fn ensure_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
