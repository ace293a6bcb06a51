use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error(
        "Legendre truncation cap {cap} exceeded before trailing coefficients fell below {tol:e}"
    )]
    TruncationCap { cap: usize, tol: f64 },

    #[error("extension residual {residual:e} above tolerance at x = {x}")]
    ExtensionResidual { x: f64, residual: f64 },

    #[error("order {m} out of range (available {available})")]
    OrderOutOfRange { m: usize, available: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("replication {rep}: {source}")]
    Replication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Data(_) | Error::Io(_) | Error::GridMismatch(_) => 3,
            Error::Replication { source, .. } => source.exit_code(),
            _ => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
