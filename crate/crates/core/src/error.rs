use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("under-determined system: {rows} rows for {params} parameters")]
    UnderDetermined { rows: usize, params: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("unsupported walk mode for {0}")]
    UnsupportedMode(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
