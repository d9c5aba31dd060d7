//! Dense tensors, reverse-mode differentiation, layers and optimization.

pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use gradcheck::{finite_diff_check, relative_error, FdOptions, GradCheckReport, TensorReport};
pub use layers::{init_uniform, mlp_forward, Activation, Linear, Mlp, MlpSpec};
pub use optim::{adam_step, ema_update, softmax_stable, OptimizerConfig};
pub use params::{ParamEntry, ParameterStore};
pub use tape::{log_sum_exp, Gradients, RbfBasis, Tape, Var};
pub use tensor::Tensor;
