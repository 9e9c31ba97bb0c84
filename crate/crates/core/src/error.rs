use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("image buffer has {actual} values, expected {expected} for {width}x{height}x3")]
    BufferSize {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("H and E stain vectors are {angle_deg:.3} degrees apart (minimum 3)")]
    DegenerateStains { angle_deg: f64 },
    #[error("stain matrix is singular or ill-conditioned (condition number {condition:.3e})")]
    SingularMatrix { condition: f64 },
    #[error("objective evaluated on an empty pixel sample")]
    EmptySample,
    #[error("only {found} tissue pixels found, at least {required} required")]
    InsufficientTissue { found: usize, required: usize },
    #[error("prediction set is empty")]
    EmptyPredictions,
    #[error("only one class present; both benign and malignant are required")]
    SingleClass,
    #[error("need at least {required} records to split, got {found}")]
    TooFewRecords { found: usize, required: usize },
}
