//! Reverse-mode automatic differentiation over dense `f64` matrices.

pub mod gradcheck;
mod ops;
pub mod optim;
mod params;
mod tensor;

pub use gradcheck::{check_gradients, relative_error, GradCheckReport};
pub use ops::sigmoid;
pub use optim::{optimizer_step, AdamConfig, OptimizerState};
pub use params::{copy_parameters, ParameterSet};
pub use tensor::Tensor;
