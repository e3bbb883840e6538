//! Minimal differentiable tensor engine: [`Tensor`], a recording [`Tape`],
//! dense layers, activations, and optimizers.

mod gradcheck;
mod layers;
mod optim;
mod param;
mod tape;
mod tensor;

pub use gradcheck::{central_difference, relative_error};
pub use layers::{Activation, Dense};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use param::{Module, ParamId, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
