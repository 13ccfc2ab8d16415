//! The conditional field `f(x; z)`: a sine synthesis network whose hidden
//! amplitudes come from a ReLU modulation network, plus the concatenation,
//! ReLU and Fourier-feature baselines.

mod batch;
mod config;
mod forward;
mod params;

pub use batch::{backward_batch, batch_input, forward_batch, predict_batch, BatchTape};
pub use config::{Conditioning, InputEncoding, ModelConfig, SynthActivation};
pub use forward::{
    concat_first_layer_preact, fourier_encode, model_backward, model_backward_into, model_forward, model_forward_taped,
    modulator_backward, modulator_forward, synthesizer_backward, synthesizer_forward, ForwardTape, ModelTape,
    ModulationSignals,
};
pub use params::{ModelGrads, ModelParams};

#[cfg(test)]
mod tests;
