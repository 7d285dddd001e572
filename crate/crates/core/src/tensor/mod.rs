//! Dense tensors, the differentiation tape, parameters and optimization.

pub mod checkpoint;
mod dense;
mod gradcheck;
mod optim;
mod params;
mod tape;

pub use dense::Tensor;
pub use gradcheck::grad_check;
pub use optim::{adam_update, Adam, AdamConfig};
pub use params::{glorot_uniform, ParamId, ParamStore};
pub(crate) use tape::log_sum_exp;
pub use tape::{Activation, BackwardFn, Gradients, Tape, Var};
