//! Dense row-major tensors with a define-by-run gradient tape.
//!
//! Every operation returns a new [`Tensor`]; when any input participates in
//! differentiation the result records a backward closure over its parents.
//! Calling [`Tensor::backward`] on a scalar walks that graph in reverse
//! topological order and accumulates gradients into every reachable tensor
//! that requires them.

mod error;
mod real;
mod tensor;

pub mod checkpoint;
pub mod grad_check;
pub mod nn;
pub mod ops;
pub mod param;

pub use crate::error::{Result, TensorError};
pub use crate::ops::attention::{multi_head_attention, scaled_dot_product_attention};
pub use crate::ops::norm::{BatchNormOutput, Mode, RunningMoments};
pub use crate::param::{BufferId, Ctx, ParamId, ParamStore, Parameter};
pub use crate::real::Real;
pub use crate::tensor::Tensor;
