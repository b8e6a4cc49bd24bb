//! Minimal differentiable engine: tensors, layers with hand-written
//! backward passes, Adam, and finite-difference gradient checks.

mod activation;
mod adam;
mod conv;
mod fc;
pub mod gradcheck;
mod lstm;
mod param;
mod real;
mod tensor;

pub use activation::{dropout, dropout_backward, mean_pool_time, mean_pool_time_backward, relu, relu_backward, Mode};
pub use adam::Adam;
pub use conv::{same_padding, Conv2d, Conv2dCache};
pub use fc::Fc;
pub use gradcheck::{grad_check, LayerSpec};
pub use lstm::{Blstm, BlstmCache, Lstm};
pub use param::{glorot_limit, Grads, Module, Parameter};
pub use real::{matmul, Real};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("channel mismatch: layer expects {expected} input channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("valid length {valid_len} outside 1..={frames}")]
    ValidLength { valid_len: usize, frames: usize },
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),
}
