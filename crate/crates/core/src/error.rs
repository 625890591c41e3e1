//! Error types shared across the simulation engine.

/// Errors produced by the simulation engine.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// A structural or parameter configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An input value violates an operation precondition.
    #[error("input error: {0}")]
    Input(String),

    /// A binary file failed to parse; `offset` is the byte position of the failure.
    #[error("ingestion error at byte {offset}: {msg}")]
    Ingest { offset: u64, msg: String },

    /// An aggregation rule could not produce an output.
    #[error("aggregation error: {0}")]
    Aggregation(String),

    /// An input is mathematically degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
