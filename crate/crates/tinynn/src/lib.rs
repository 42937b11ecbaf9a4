//! A small deterministic tensor engine with hand-written forward and backward
//! passes for exactly the layers the glove models need: dense and 1-D
//! convolution layers, ReLU and inverted dropout, multi-head self-attention,
//! layer normalization, post-norm transformer encoder blocks, cross-entropy and
//! mean-squared-error losses, and Adam.
//!
//! Every operation is generic over [`Real`] so the same code path runs in `f32`
//! for training and in `f64` for finite-difference gradient checks.

pub mod activation;
pub mod attention;
pub mod conv;
pub mod encoder;
mod error;
pub mod exec;
pub mod kernels;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod params;
mod real;
mod tensor;
pub mod train;
pub mod weights;

pub use error::{NnError, Result};
pub use exec::Exec;
pub use params::{Grads, ModelParams, ParamId};
pub use real::Real;
pub use tensor::Tensor;
