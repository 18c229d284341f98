//! Small deterministic feed-forward engine: dense, 3×3 conv, ReLU, 2×2
//! max-pool and inverted dropout layers feeding a dense softmax head.

mod arch;
pub mod gradcheck;
pub mod io;
mod loss;
mod network;
mod optim;
mod scalar;
mod tensor;

pub use arch::{ActShape, Architecture, LayerSpec};
pub use gradcheck::{grad_check, verification_suite, GradCheckConfig, GradCheckResult};
pub use io::{decode_model, encode_model, load_model, save_model};
pub(crate) use loss::{ce_logit_grad, mean_ce_unchecked};
pub use loss::{clamped_ln, cross_entropy_row, soft_ce, softmax_row, softmax_stable, LOG_CLAMP, ROW_SUM_TOL};
pub use network::{DropoutMode, ForwardOutput, LayerParams, Mode, Network, ParamBuffers};
pub use optim::{
    backward_step, soft_ce_objective, step_with, Objective, OptimState, StepIndex, StepSchedule,
};
pub use scalar::Real;
pub use tensor::{Matrix, Tensor4};
