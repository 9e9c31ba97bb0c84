use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes. Each failure class has its own code.
pub mod exit {
    pub const OK: i32 = 0;
    /// Reserved for argument errors reported by the parser.
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const INSUFFICIENT_TISSUE: i32 = 4;
    pub const DEGENERATE_STAINS: i32 = 5;
    pub const SINGULAR_MATRIX: i32 = 6;
    pub const PARSE: i32 = 7;
    pub const EMPTY_PREDICTIONS: i32 = 8;
    pub const SINGLE_CLASS: i32 = 9;
    pub const EMPTY_DATASET: i32 = 10;
    pub const GRADIENT_CHECK: i32 = 11;
    pub const INVALID_ARGUMENT: i32 = 12;
    pub const BATCH_FAILURES: i32 = 13;
    pub const TOO_FEW_RECORDS: i32 = 14;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] stainforge_core::Error),
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("no samples found under {}", .0.display())]
    EmptyDataset(PathBuf),
    #[error("gradient check failed: {0}")]
    GradientCheck(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{failed} of {total} images failed")]
    BatchFailures { failed: usize, total: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use stainforge_core::Error as C;
        match self {
            Error::Io { .. } | Error::Image { .. } => exit::IO,
            Error::Parse { .. } => exit::PARSE,
            Error::EmptyDataset(_) => exit::EMPTY_DATASET,
            Error::GradientCheck(_) => exit::GRADIENT_CHECK,
            Error::InvalidArgument(_) => exit::INVALID_ARGUMENT,
            Error::BatchFailures { .. } => exit::BATCH_FAILURES,
            Error::Core(c) => match c {
                C::InsufficientTissue { .. } => exit::INSUFFICIENT_TISSUE,
                C::DegenerateStains { .. } => exit::DEGENERATE_STAINS,
                C::SingularMatrix { .. } => exit::SINGULAR_MATRIX,
                C::EmptyPredictions => exit::EMPTY_PREDICTIONS,
                C::SingleClass => exit::SINGLE_CLASS,
                C::TooFewRecords { .. } => exit::TOO_FEW_RECORDS,
                C::BufferSize { .. }
                | C::DimensionMismatch(_)
                | C::InvalidParameter(_)
                | C::EmptySample => exit::INVALID_ARGUMENT,
            },
        }
    }
}
