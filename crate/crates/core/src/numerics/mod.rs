//! Dense tensors, a reverse-mode tape, Adam and the warm-up schedule.

mod gradcheck;
pub mod kernels;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::{
    check_gradients, finite_diff_grad, max_relative_error, primitive_gradchecks, GRADCHECK_FLOOR, GRADCHECK_STEP,
};
pub use optim::{AdamConfig, AdamState, LrSchedule};
pub use tape::{Gradients, Segment, Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;
