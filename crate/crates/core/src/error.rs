use std::path::PathBuf;

/// Errors raised by the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("kernel under-resolved: {found} offsets inside the support, need at least {required}")]
    KernelUnderResolved { found: usize, required: usize },

    #[error("resolution guard violated: {0}")]
    Resolution(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lattice window exhausted: shift {shift:?} moves the queried box outside the allocated window")]
    WindowExhausted { shift: Vec<i64> },

    #[error("f profile evaluated at negative argument {0}")]
    NegativeArgument(f64),

    #[error("empty interface")]
    EmptyInterface,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed binary data: {0}")]
    Decode(String),

    #[error("study failed: {0}")]
    Study(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
