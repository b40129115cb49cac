use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{name} = {value} is out of range, expected {range}")]
    OutOfRange {
        name: &'static str,
        value: String,
        range: String,
    },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("zero high-dimensional distance between points {i} and {j}")]
    ZeroDistance { i: usize, j: usize },

    #[error("newick parse error at byte {position}: {message}")]
    Newick { position: usize, message: String },

    #[error("unknown method `{method}`, registered methods: {registered}")]
    UnknownMethod { method: String, registered: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("t-SNE diverged to non-finite coordinates at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("backend `{backend}` failed: {message}\n--- stderr ---\n{stderr}")]
    Backend {
        backend: String,
        message: String,
        stderr: String,
    },

    #[error("malformed diagnostic: {0}")]
    Diagnostic(String),

    #[error("agent failed after {attempts} attempts: {last_error}")]
    AgentExhausted {
        attempts: usize,
        last_error: String,
        last_raw: Option<String>,
    },

    #[error("cannot write to {path}: {source}")]
    Unwritable {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
