//! Dense tensors, a reverse-mode autodiff tape, parameters and the layers
//! built from them.

mod gradcheck;
mod nn;
mod optim;
mod param;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, ParamCheck};
pub use nn::{Dropout, LayerNorm, Linear, Mlp, LAYER_NORM_EPS};
pub use optim::{AdamW, AdamWConfig};
pub use param::{Initializer, ParamId, ParamStore, Parameter};
pub use tape::{AttentionMask, Tape, Var};
pub use tensor::Tensor;
