use thiserror::Error;

/// Errors raised by the tensorization, encoding and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point {0} outside [0,1)")]
    OutOfDomain(f64),
    #[error("leaf index {index} out of range for {count} leaves")]
    LeafOutOfRange { index: u64, count: u64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("incompatible trains: {0}")]
    Incompatible(String),
    #[error("knot {0} is not b-adic")]
    NonBadicKnot(String),
    #[error("invalid spline: {0}")]
    InvalidSpline(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite sample at {0}")]
    NonFinite(f64),
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
