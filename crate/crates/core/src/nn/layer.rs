//! Dense layers and pointwise activations.
//!
//! A layer computes `pre = W x + b` followed by an activation. Weights are
//! row-major `[out_dim x in_dim]`.

use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::scalar::{cast_vec, dot, Scalar};
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sine,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Sine => v.sin(),
            Activation::Relu => v.max(T::zero()),
            Activation::Identity => v,
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Sine => v.cos(),
            Activation::Relu => {
                if v > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<T>,
    bias: Vec<T>,
    activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(out_dim: usize, in_dim: usize, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::config(format!(
                "layer dims must be >= 1 (got {out_dim}x{in_dim})"
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights: vec![T::zero(); out_dim * in_dim],
            bias: vec![T::zero(); out_dim],
            activation,
        })
    }

    pub fn from_parts(weights: Vec<T>, bias: Vec<T>, in_dim: usize, activation: Activation) -> Result<Self> {
        let out_dim = bias.len();
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::config("layer dims must be >= 1"));
        }
        ensure_len("layer weights", out_dim * in_dim, weights.len())?;
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    /// Weights and bias borrowed mutably at once.
    pub fn parts_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.weights, &mut self.bias)
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.weights[r * self.in_dim..(r + 1) * self.in_dim]
    }

    pub fn weight(&self, r: usize, c: usize) -> T {
        self.weights[r * self.in_dim + c]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn cast<U: Scalar>(&self) -> DenseLayer<U> {
        DenseLayer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weights: cast_vec(&self.weights),
            bias: cast_vec(&self.bias),
            activation: self.activation,
        }
    }

    /// Pre-activation `W x + b`.
    pub fn preactivate(&self, input: &[T]) -> Result<Vec<T>> {
        linear_forward(self, input)
    }

    /// `activation(W x + b)`.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let pre = linear_forward(self, input)?;
        Ok(activate(&pre, self.activation))
    }
}

/// `W x + b`.
pub fn linear_forward<T: Scalar>(layer: &DenseLayer<T>, input: &[T]) -> Result<Vec<T>> {
    ensure_len("linear_forward input", layer.in_dim, input.len())?;
    Ok(layer
        .weights
        .chunks_exact(layer.in_dim)
        .zip(&layer.bias)
        .map(|(row, b)| dot(row, input) + *b)
        .collect())
}

pub fn activate<T: Scalar>(v: &[T], kind: Activation) -> Vec<T> {
    v.iter().map(|&x| kind.apply(x)).collect()
}

/// Chain rule through a pointwise activation: `upstream * activation'(v)`.
pub fn activate_backward<T: Scalar>(v: &[T], kind: Activation, upstream: &[T]) -> Result<Vec<T>> {
    ensure_len("activate_backward upstream", v.len(), upstream.len())?;
    Ok(v.iter().zip(upstream).map(|(&x, &u)| u * kind.derivative(x)).collect())
}

fn uniform_layer<T: Scalar>(
    out_dim: usize,
    in_dim: usize,
    bound: f64,
    activation: Activation,
    rng: &mut RngStream,
) -> Result<DenseLayer<T>> {
    let mut layer = DenseLayer::zeros(out_dim, in_dim, activation)?;
    for w in layer.weights.iter_mut() {
        *w = T::from_f64(rng.uniform(-bound, bound));
    }
    Ok(layer)
}

/// First sine layer: `U(-1/fan_in, 1/fan_in)` scaled by `omega0`, zero bias.
pub fn init_siren_first<T: Scalar>(
    out_dim: usize,
    in_dim: usize,
    omega0: f64,
    rng: &mut RngStream,
) -> Result<DenseLayer<T>> {
    uniform_layer(out_dim, in_dim, omega0 / in_dim as f64, Activation::Sine, rng)
}

/// Hidden sine layer: `U(-sqrt(6/fan_in)/omega0, sqrt(6/fan_in)/omega0)`, zero bias.
pub fn init_siren_hidden<T: Scalar>(
    out_dim: usize,
    in_dim: usize,
    omega0: f64,
    rng: &mut RngStream,
) -> Result<DenseLayer<T>> {
    if omega0 <= 0.0 {
        return Err(Error::config("omega0 must be positive"));
    }
    uniform_layer(
        out_dim,
        in_dim,
        (6.0 / in_dim as f64).sqrt() / omega0,
        Activation::Sine,
        rng,
    )
}

/// Kaiming-uniform `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero bias.
pub fn init_kaiming<T: Scalar>(
    out_dim: usize,
    in_dim: usize,
    activation: Activation,
    rng: &mut RngStream,
) -> Result<DenseLayer<T>> {
    uniform_layer(out_dim, in_dim, (6.0 / in_dim as f64).sqrt(), activation, rng)
}
