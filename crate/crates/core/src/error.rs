use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Transform length is zero, not a power of two, or does not match a plan.
    #[error("size error: {0}")]
    Size(String),
    /// A strided layout addresses overlapping or out-of-range elements.
    #[error("layout error: {0}")]
    Layout(String),
    /// A half spectrum could not have come from real data.
    #[error("consistency error: imaginary residue {residue:e} exceeds {limit:e}")]
    Consistency { residue: f64, limit: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("index out of bounds: {0}")]
    Bounds(String),
    /// An operation was handed data in the wrong layout or shape.
    #[error("contract error: {0}")]
    Contract(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("transport error: {0}")]
    Transport(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
