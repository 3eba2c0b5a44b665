//! Layer primitives with hand-written backward passes.
//!
//! Activations are `[channels, length]` tensors. Every backward function
//! takes the upstream gradient of a scalar loss with respect to the layer
//! output and returns gradients with respect to the layer input and
//! parameters.

mod activation;
mod conv;
pub mod gradcheck;
mod loss;

pub use activation::{concat_channels, dropout, dropout_backward, relu, relu_backward, split_channels};
pub use conv::{conv1d_backward, conv1d_forward, ConvGrads, ConvParams, InitScheme, PaddingMode};
pub use gradcheck::grad_check;
pub use loss::mse_loss;
