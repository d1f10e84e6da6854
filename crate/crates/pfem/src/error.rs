//! Pipeline error type: numeric failures keep their identity (they map to a
//! distinct process exit code), everything else folds into usage/io errors.

use std::fmt;

#[derive(Debug)]
pub enum PfemError {
    Core(pfem_core::Error),
    Io(std::io::Error),
    Json { file: String, source: serde_json::Error },
    Schema(String),
    Usage(String),
    /// A solver failed to converge; carries a short description.
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, PfemError>;

impl fmt::Display for PfemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PfemError::Core(e) => write!(f, "{e}"),
            PfemError::Io(e) => write!(f, "io error: {e}"),
            PfemError::Json { file, source } => write!(f, "{file}: {source}"),
            PfemError::Schema(msg) => write!(f, "schema error: {msg}"),
            PfemError::Usage(msg) => write!(f, "{msg}"),
            PfemError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for PfemError {}

impl From<pfem_core::Error> for PfemError {
    fn from(e: pfem_core::Error) -> Self {
        PfemError::Core(e)
    }
}

impl From<std::io::Error> for PfemError {
    fn from(e: std::io::Error) -> Self {
        PfemError::Io(e)
    }
}

impl PfemError {
    /// Exit code per the CLI contract: 1 usage/schema/io, 2 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            PfemError::Numerical(_) => 2,
            PfemError::Core(e) => match e {
                pfem_core::Error::ElementInversion { .. }
                | pfem_core::Error::SingularMatrix
                | pfem_core::Error::NonFinite { .. }
                | pfem_core::Error::NotContractive { .. } => 2,
                _ => 1,
            },
            _ => 1,
        }
    }
}
