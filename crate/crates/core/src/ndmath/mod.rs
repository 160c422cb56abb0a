//! Small dense-tensor toolkit: reverse-mode differentiation, Adam, and MLPs.

mod mlp;
mod optim;
mod tape;
mod tensor;

pub use mlp::{Mlp, OutputActivation, DEFAULT_LEAKY_SLOPE};
pub use optim::{ParamSet, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tape::{log_sigmoid, Gradients, Tape, Var};
pub use tensor::Tensor;
