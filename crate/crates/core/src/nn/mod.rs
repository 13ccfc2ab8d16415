//! Dense-network substrate: layers, activations, initialization, Adam and a
//! finite-difference gradient oracle.

mod adam;
mod gradcheck;
mod layer;
mod rng;
mod scalar;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_difference_grad, relative_error};
pub use layer::{
    activate, activate_backward, init_kaiming, init_siren_first, init_siren_hidden, linear_forward, Activation,
    DenseLayer,
};
pub use rng::RngStream;
pub use scalar::{axpy, cast_vec, dot, gemm, Layout, Scalar};
