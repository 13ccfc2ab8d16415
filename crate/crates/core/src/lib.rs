//! Neural fields with modulated periodic activations.
//!
//! A sine synthesis network maps local coordinates to signal values; a ReLU
//! modulation network turns a latent code into per-layer amplitudes. Signals
//! are split into overlapping tiles, one latent code per tile, and decoded by
//! n-linear blending of the overlapping tile predictions.

pub mod cli;
pub mod error;
pub mod format;
pub mod model;
pub mod nn;
pub mod signals;
pub mod tiling;
pub mod training;

pub use error::{Error, Result};
