//! Minimal differentiable numerics: tensors, a reverse-mode tape with the
//! operators the recurrent models need, dropout masks, Adam, and a
//! finite-difference gradient checker.

mod dropout;
mod gradcheck;
mod graph;
mod optim;
mod params;
mod rng;
mod scalar;
mod tensor;

pub use dropout::{dropout_mask, row_scales, DropoutKind, LockedDropout};
pub use gradcheck::{
    analytic_grads, grad_check, grad_check_against, relative_error, RELATIVE_FLOOR,
};
pub use graph::{softmax_rows, Graph, LeafGrads, Var};
pub use optim::{adam_step, AdamConfig, OptimizerState};
pub use params::{ParamGrads, ParamId, ParamSet};
pub use rng::{streams, RngStream};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Global gradient-norm ceiling used while training recurrent models.
pub const CLIP_NORM: f64 = 0.25;
