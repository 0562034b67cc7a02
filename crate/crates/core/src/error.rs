use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A scalar function was evaluated outside its domain (non-finite input).
    #[error("{what}: input {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("data error: {0}")]
    Data(String),
    /// A forward value or a gradient became NaN or infinite.
    #[error("non-finite {quantity} produced by node {node} ({op})")]
    Numeric {
        node: usize,
        op: &'static str,
        quantity: &'static str,
    },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;
