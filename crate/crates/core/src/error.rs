use std::path::PathBuf;

use crate::types::PromptKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty program population")]
    EmptyPopulation,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("tournament needs two individuals")]
    TournamentTooSmall,

    #[error("no test candidates")]
    NoTestCandidates,

    #[error("no code in response")]
    NoCode,

    #[error("no tests in response")]
    NoTests,

    #[error("provider call failed for {kind} on problem {problem_id}: {message}")]
    Provider {
        kind: PromptKind,
        problem_id: String,
        message: String,
    },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("unscripted request ({kind}, fingerprint {fingerprint})")]
    Unscripted { kind: PromptKind, fingerprint: String },

    #[error("script exhausted for {kind} at call {seq}")]
    ScriptExhausted { kind: PromptKind, seq: u64 },

    #[error("cannot load script {path}: {message}")]
    ScriptLoad { path: PathBuf, message: String },

    #[error("sandbox setup error: {0}")]
    Setup(String),

    #[error("run fault: {0}")]
    RunFault(String),

    #[error("problem {problem_id}: {message}")]
    ProblemLoad { problem_id: String, message: String },

    #[error("no reference solution for problem {0}")]
    NoReferenceSolution(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
