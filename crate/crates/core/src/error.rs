use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("hybrid traces unsupported (thread != 1 at line {line})")]
    HybridTrace { line: usize },

    #[error("non-monotonic event times for rank {rank} at line {line}")]
    NonMonotonic { rank: u32, line: usize },

    #[error("missing mandatory column {0}")]
    MissingColumn(String),

    #[error("duplicate burst key: task {task}, seq {seq}")]
    DuplicateBurst { task: u32, seq: usize },

    #[error("executions disagree on ranks: {0}")]
    RankMismatch(String),

    #[error("execution {0} contains no bursts")]
    EmptyExecution(String),

    #[error("counter sets differ: {0}")]
    CounterSetMismatch(String),

    #[error("match group {0} references a missing burst")]
    GroupIntegrity(String),

    #[error("event-type id collision with base trace: {0:?}")]
    IdCollision(Vec<u64>),

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown counter set {0}")]
    UnknownCounterSet(String),

    #[error("invalid dataset: {0}")]
    Invalid(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI: 2 for i/o and usage-level problems,
    /// 3 for unsupported (hybrid) traces, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } => 2,
            Error::HybridTrace { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
