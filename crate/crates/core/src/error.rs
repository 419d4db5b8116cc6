use thiserror::Error;

/// Errors produced by the nanojet pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mesh resolution too coarse: lens of radius {radius} contains no elements (h = {h})")]
    EmptyLens { radius: f64, h: f64 },

    #[error("point ({x}, {y}) lies outside the meshed domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("field length {got} does not match mesh vertex count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value in {what} at vertex {vertex}")]
    NonFinite { what: &'static str, vertex: usize },

    #[error("exp(tau + zeta) overflows at vertex {vertex}: tau + zeta = {exponent}")]
    WavenumberOverflow { vertex: usize, exponent: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("solve for sample {sample} failed: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sample list")]
    EmptySamples,

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
