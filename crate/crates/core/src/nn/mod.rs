//! Dense numerical kernel: matrices, nonlinearities, the GRU cell,
//! parameters with freeze flags, SGD with clipping, and regularizers.

pub mod checkpoint;
mod gru;
mod matrix;
mod ops;
mod param;

pub use gru::{gru_backward, gru_forward, gru_step, GruCache, GruWeights};
pub use matrix::{axpy, dot, gemv_acc, gemv_t_acc, ger_acc, Matrix};
pub use ops::{cross_entropy, dropout_mask, sigmoid, softmax, softmax_in_place};
pub use param::{
    add_gaussian_noise, clip_gradients, global_grad_norm, sgd_step, NoiseSnapshot, ParamGroup,
    Parameter,
};

