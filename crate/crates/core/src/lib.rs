//! Seismic-to-acoustic-impedance inversion with a temporal convolutional
//! network (TCN).
//!
//! The crate is dependency-light and fully deterministic: every layer has a
//! hand-written backward pass verified by central finite differences, all
//! randomness flows from an explicit [`Rng`], and arithmetic is `f64`
//! throughout.
//!
//! Pipeline overview:
//!
//! * [`data`] builds a synthetic layered impedance section, forward-models
//!   seismic via reflectivity convolved with a Ricker wavelet, and reads/writes
//!   the `SEIS1` trace format.
//! * [`tcn`] assembles temporal blocks into the model; [`nn`] holds the layer
//!   primitives and the gradient-check harness.
//! * [`train`] runs full-batch Adam ([`optim`]) and owns the checkpoint format.
//! * [`eval`] computes PCC / r² and exports figure data.
//! * [`verify`] runs the finite-difference gradient suite.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod tcn;
pub mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::Tensor;
