use thiserror::Error;

/// Errors raised by the simulation building blocks.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid call parameters (empty inputs, sizes out of range, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A frame plan could not be constructed.
    #[error("planning error: {0}")]
    Planning(String),

    /// A trace file violates the trace schema.
    #[error("trace {source_name}, line {line}: {message}")]
    TraceLoad {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
