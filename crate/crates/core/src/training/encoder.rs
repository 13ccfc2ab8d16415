//! Three-layer MLP mapping a flattened tile of samples to its latent code.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::nn::{gemm, init_kaiming, Activation, DenseLayer, Layout, RngStream, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    /// `product(tile_size) * m`.
    pub input_dim: usize,
    pub hidden: usize,
    pub latent_dim: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.latent_dim == 0 {
            return Err(Error::config("encoder dimensions must be >= 1"));
        }
        Ok(())
    }
}

/// `ReLU -> ReLU -> linear`, Kaiming-uniform weights and zero biases.
#[derive(Debug, Clone, PartialEq)]
pub struct TileEncoder<T> {
    config: EncoderConfig,
    layers: Vec<DenseLayer<T>>,
}

/// Activations kept for the backward pass, one row per encoded tile.
#[derive(Debug, Clone)]
pub struct EncoderTape<T> {
    rows: usize,
    input: Vec<T>,
    preacts: Vec<Vec<T>>,
    outputs: Vec<Vec<T>>,
}

impl<T: Scalar> TileEncoder<T> {
    pub fn init(config: EncoderConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let layers = vec![
            init_kaiming(config.hidden, config.input_dim, Activation::Relu, rng)?,
            init_kaiming(config.hidden, config.hidden, Activation::Relu, rng)?,
            init_kaiming(config.latent_dim, config.hidden, Activation::Identity, rng)?,
        ];
        Ok(Self { config, layers })
    }

    pub fn from_layers(config: EncoderConfig, layers: Vec<DenseLayer<T>>) -> Result<Self> {
        config.validate()?;
        ensure_len("encoder layers", 3, layers.len())?;
        let chain = [
            (config.input_dim, config.hidden),
            (config.hidden, config.hidden),
            (config.hidden, config.latent_dim),
        ];
        for (l, (i, o)) in layers.iter().zip(chain) {
            ensure_len("encoder layer input", i, l.in_dim())?;
            ensure_len("encoder layer output", o, l.out_dim())?;
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [l.weights(), l.bias()]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                let (w, b) = l.parts_mut();
                [w, b]
            })
            .collect()
    }

    pub fn tensor_shapes(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors().concat()
    }

    pub fn load_flat(&mut self, flat: &[T]) -> Result<()> {
        ensure_len("encoder parameters", self.param_count(), flat.len())?;
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[off..off + t.len()]);
            off += t.len();
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> TileEncoder<U> {
        TileEncoder {
            config: self.config,
            layers: self.layers.iter().map(DenseLayer::cast).collect(),
        }
    }

    pub fn zero_grads(&self) -> Vec<Vec<T>> {
        self.tensor_shapes().into_iter().map(|n| vec![T::zero(); n]).collect()
    }

    /// Encodes `rows` tiles (row-major `rows x input_dim`).
    pub fn forward_taped(&self, tiles: &[T]) -> Result<(Vec<T>, EncoderTape<T>)> {
        let din = self.config.input_dim;
        if tiles.is_empty() || !tiles.len().is_multiple_of(din) {
            return Err(Error::dims("encoder input", din, tiles.len()));
        }
        let rows = tiles.len() / din;
        let mut preacts = Vec::with_capacity(3);
        let mut outputs: Vec<Vec<T>> = Vec::with_capacity(3);
        for (i, layer) in self.layers.iter().enumerate() {
            let prev: &[T] = if i == 0 { tiles } else { &outputs[i - 1] };
            let mut pre = Vec::with_capacity(rows * layer.out_dim());
            for _ in 0..rows {
                pre.extend_from_slice(layer.bias());
            }
            gemm(
                rows,
                layer.in_dim(),
                layer.out_dim(),
                T::one(),
                prev,
                Layout::Normal,
                layer.weights(),
                Layout::Transposed,
                T::one(),
                &mut pre,
            );
            let act = layer.activation();
            outputs.push(pre.iter().map(|&v| act.apply(v)).collect());
            preacts.push(pre);
        }
        let z = outputs[2].clone();
        Ok((
            z,
            EncoderTape {
                rows,
                input: tiles.to_vec(),
                preacts,
                outputs,
            },
        ))
    }

    pub fn encode(&self, tiles: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_taped(tiles)?.0)
    }

    /// Accumulates parameter gradients for upstream `dz` (`rows x latent_dim`).
    pub fn backward(&self, tape: &EncoderTape<T>, dz: &[T], grads: &mut [Vec<T>]) -> Result<()> {
        ensure_len("encoder latent gradient", tape.rows * self.config.latent_dim, dz.len())?;
        ensure_len("encoder gradient tensors", 6, grads.len())?;
        let rows = tape.rows;
        let mut upstream = dz.to_vec();
        for i in (0..3).rev() {
            let layer = &self.layers[i];
            let act = layer.activation();
            for (g, &p) in upstream.iter_mut().zip(&tape.preacts[i]) {
                *g *= act.derivative(p);
            }
            let prev: &[T] = if i == 0 { &tape.input } else { &tape.outputs[i - 1] };
            let (dout, din) = (layer.out_dim(), layer.in_dim());
            gemm(
                dout,
                rows,
                din,
                T::one(),
                &upstream,
                Layout::Transposed,
                prev,
                Layout::Normal,
                T::one(),
                &mut grads[2 * i],
            );
            for row in upstream.chunks_exact(dout) {
                for (b, g) in grads[2 * i + 1].iter_mut().zip(row) {
                    *b += *g;
                }
            }
            if i > 0 {
                let mut d_prev = vec![T::zero(); rows * din];
                gemm(
                    rows,
                    dout,
                    din,
                    T::one(),
                    &upstream,
                    Layout::Normal,
                    layer.weights(),
                    Layout::Normal,
                    T::zero(),
                    &mut d_prev,
                );
                upstream = d_prev;
            }
        }
        Ok(())
    }
}
