//! A small deterministic tensor engine with reverse-mode differentiation.

mod graph;
mod gradcheck;
mod optim;
mod rng;
mod tensor;

pub use graph::{Binary, Graph, Mode, Reduce, Unary, Var};
pub use gradcheck::{grad_check, grad_check_module, GradCheckReport};
pub use optim::{adam_step, Adam, AdamConfig, AdamState};
pub use rng::{RngState, RunRng, Stream};
pub use tensor::{Module, Param, ParamId, Tensor};

/// Uniform Glorot initialisation in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut RngState) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.uniform_range(-bound, bound);
    }
    t
}
