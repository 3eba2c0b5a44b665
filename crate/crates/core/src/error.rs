use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty extent in shape {0:?}")]
    EmptyExtent(Vec<usize>),

    #[error("tensor rank {0} unsupported (1..=3)")]
    Rank(usize),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero standard deviation in {0}")]
    ZeroStd(&'static str),

    #[error("zero variance input to {0}")]
    ZeroVariance(&'static str),

    #[error("non-positive impedance {value} at sample {index}")]
    NonPositiveImpedance { index: usize, value: f64 },

    #[error("section extents differ: {a_traces}x{a_samples} vs {b_traces}x{b_samples}")]
    ExtentMismatch {
        a_traces: usize,
        a_samples: usize,
        b_traces: usize,
        b_samples: usize,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("extent mismatch: {0}")]
    HeaderExtent(String),

    #[error("truncation: {0}")]
    Truncated(String),

    #[error("unsupported checkpoint version {0}")]
    Version(u8),

    #[error("function is not deterministic: f(theta) gave {first} then {second}")]
    NonDeterministic { first: f64, second: f64 },

    #[error("non-finite loss at epoch {epoch}, training trace {trace}")]
    Diverged { epoch: usize, trace: usize },

    #[error("empty split: {0}")]
    EmptySplit(&'static str),

    #[error(transparent)]
    Io(#[from] io::Error),
}
