use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A text record that does not match its expected format. `line` is 1-based.
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("unknown relation '{0}'")]
    UnknownRelation(String),

    #[error("relation index {index} out of range for vocabulary of size {size}")]
    BadRelationIndex { index: usize, size: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid vocabulary: {0}")]
    BadVocabulary(String),

    #[error("invalid triple: {0}")]
    BadTriple(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid probability vector: {0}")]
    BadProbability(String),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("infeasible dataset spec: {0}")]
    InfeasibleSpec(String),

    #[error("epoch {epoch} outside schedule range 0..={total}")]
    EpochOutOfRange { epoch: usize, total: usize },

    /// Training diverged; the run is aborted rather than producing garbage.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
