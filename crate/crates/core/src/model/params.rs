use super::config::{Conditioning, InputEncoding, ModelConfig, SynthActivation};
use crate::error::{ensure_len, Error, Result};
use crate::nn::{
    cast_vec, init_kaiming, init_siren_first, init_siren_hidden, Activation, DenseLayer, RngStream, Scalar,
};

/// Learnable parameters of the conditional field `f(x; z)`.
///
/// Canonical tensor order (used by optimizers and checkpoints): every
/// synthesis hidden layer (weights then bias), every modulator layer, then
/// the output layer. The Fourier matrix is fixed at init and not trained.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    config: ModelConfig,
    synth: Vec<DenseLayer<T>>,
    modulator: Vec<DenseLayer<T>>,
    output: DenseLayer<T>,
    fourier: Option<Vec<T>>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn init(config: ModelConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let width = config.width;
        let sine = config.activation == SynthActivation::Sine;
        let act: Activation = config.activation.into();
        let mut synth = Vec::with_capacity(config.hidden_layers);
        let in0 = config.synth_input_dim();
        synth.push(if sine {
            init_siren_first(width, in0, config.omega0, rng)?
        } else {
            init_kaiming(width, in0, act, rng)?
        });
        for _ in 1..config.hidden_layers {
            synth.push(if sine {
                init_siren_hidden(width, width, config.hidden_init_omega.unwrap_or(config.omega0), rng)?
            } else {
                init_kaiming(width, width, act, rng)?
            });
        }
        let output = if sine {
            retag(
                init_siren_hidden(config.output_dim, width, config.omega0, rng)?,
                Activation::Identity,
            )
        } else {
            init_kaiming(config.output_dim, width, Activation::Identity, rng)?
        };

        let mut modulator = Vec::new();
        if config.is_modulated() {
            let d = config.latent_dim;
            modulator.push(init_kaiming(width, d, Activation::Relu, rng)?);
            for _ in 0..config.hidden_layers {
                modulator.push(init_kaiming(width, width + d, Activation::Relu, rng)?);
            }
            for l in &mut modulator {
                l.bias_mut().fill(T::from_f64(config.modulator_bias));
            }
        }

        let fourier = match config.input_encoding {
            InputEncoding::Raw => None,
            InputEncoding::FourierFeatures { sigma, feature_count } => Some(
                (0..feature_count * config.input_dim)
                    .map(|_| T::from_f64(rng.normal(0.0, sigma)))
                    .collect(),
            ),
        };

        Ok(Self {
            config,
            synth,
            modulator,
            output,
            fourier,
        })
    }

    /// Assemble from explicit layers, checking the dimension chain.
    pub fn from_layers(
        config: ModelConfig,
        synth: Vec<DenseLayer<T>>,
        modulator: Vec<DenseLayer<T>>,
        output: DenseLayer<T>,
        fourier: Option<Vec<T>>,
    ) -> Result<Self> {
        config.validate()?;
        let p = Self {
            config,
            synth,
            modulator,
            output,
            fourier,
        };
        p.check_shapes()?;
        Ok(p)
    }

    fn check_shapes(&self) -> Result<()> {
        let c = &self.config;
        let w = c.width;
        ensure_len("synthesis layer count", c.hidden_layers, self.synth.len())?;
        let act: Activation = c.activation.into();
        for (i, l) in self.synth.iter().enumerate() {
            let want_in = if i == 0 { c.synth_input_dim() } else { w };
            ensure_len("synthesis layer input", want_in, l.in_dim())?;
            ensure_len("synthesis layer output", w, l.out_dim())?;
            if l.activation() != act {
                return Err(Error::config(format!(
                    "synthesis layer {i} has activation {:?}",
                    l.activation()
                )));
            }
        }
        ensure_len("output layer input", w, self.output.in_dim())?;
        ensure_len("output layer output", c.output_dim, self.output.out_dim())?;
        if c.is_modulated() {
            ensure_len("modulator layer count", c.hidden_layers + 1, self.modulator.len())?;
            for (i, l) in self.modulator.iter().enumerate() {
                let want_in = if i == 0 { c.latent_dim } else { w + c.latent_dim };
                ensure_len("modulator layer input", want_in, l.in_dim())?;
                ensure_len("modulator layer output", w, l.out_dim())?;
            }
        } else {
            ensure_len("modulator layer count", 0, self.modulator.len())?;
        }
        match (c.input_encoding, &self.fourier) {
            (InputEncoding::Raw, None) => {}
            (InputEncoding::FourierFeatures { feature_count, .. }, Some(b)) => {
                ensure_len("fourier matrix", feature_count * c.input_dim, b.len())?;
            }
            _ => return Err(Error::config("Fourier matrix presence does not match input encoding")),
        }
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn synth_layers(&self) -> &[DenseLayer<T>] {
        &self.synth
    }

    pub fn synth_layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.synth
    }

    pub fn modulator_layers(&self) -> &[DenseLayer<T>] {
        &self.modulator
    }

    pub fn modulator_layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.modulator
    }

    pub fn output_layer(&self) -> &DenseLayer<T> {
        &self.output
    }

    pub fn output_layer_mut(&mut self) -> &mut DenseLayer<T> {
        &mut self.output
    }

    pub fn fourier_matrix(&self) -> Option<&[T]> {
        self.fourier.as_deref()
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer<T>> {
        self.synth
            .iter()
            .chain(&self.modulator)
            .chain(std::iter::once(&self.output))
    }

    /// Trainable tensors in canonical order.
    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers().flat_map(|l| [l.weights(), l.bias()]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for l in self
            .synth
            .iter_mut()
            .chain(self.modulator.iter_mut())
            .chain(std::iter::once(&mut self.output))
        {
            let (w, b) = l.parts_mut();
            out.push(w);
            out.push(b);
        }
        out
    }

    pub fn tensor_shapes(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(DenseLayer::param_count).sum()
    }

    /// All trainable values flattened in canonical order.
    pub fn flatten(&self) -> Vec<T> {
        self.tensors().concat()
    }

    pub fn load_flat(&mut self, flat: &[T]) -> Result<()> {
        ensure_len("flat parameter vector", self.param_count(), flat.len())?;
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config,
            synth: self.synth.iter().map(DenseLayer::cast).collect(),
            modulator: self.modulator.iter().map(DenseLayer::cast).collect(),
            output: self.output.cast(),
            fourier: self.fourier.as_ref().map(|b| cast_vec(b)),
        }
    }

    pub fn zero_grads(&self) -> ModelGrads<T> {
        ModelGrads {
            tensors: self.tensor_shapes().into_iter().map(|n| vec![T::zero(); n]).collect(),
            synth_layers: self.synth.len(),
            modulator_layers: self.modulator.len(),
        }
    }
}

fn retag<T: Scalar>(layer: DenseLayer<T>, activation: Activation) -> DenseLayer<T> {
    let in_dim = layer.in_dim();
    DenseLayer::from_parts(layer.weights().to_vec(), layer.bias().to_vec(), in_dim, activation)
        .expect("retagging keeps shapes")
}

/// Gradient buffers mirroring [`ModelParams`] in canonical tensor order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T> {
    tensors: Vec<Vec<T>>,
    synth_layers: usize,
    modulator_layers: usize,
}

impl<T: Scalar> ModelGrads<T> {
    pub fn tensors(&self) -> Vec<&[T]> {
        self.tensors.iter().map(Vec::as_slice).collect()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors.concat()
    }

    pub fn zero(&mut self) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn add(&mut self, other: &ModelGrads<T>) -> Result<()> {
        ensure_len("gradient tensor count", self.tensors.len(), other.tensors.len())?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            ensure_len("gradient tensor", a.len(), b.len())?;
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| *v == T::zero()))
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Weight and bias gradient of synthesis layer `i`.
    pub(crate) fn synth_mut(&mut self, i: usize) -> (&mut [T], &mut [T]) {
        self.pair_mut(2 * i)
    }

    pub(crate) fn modulator_mut(&mut self, i: usize) -> (&mut [T], &mut [T]) {
        self.pair_mut(2 * (self.synth_layers + i))
    }

    pub(crate) fn output_mut(&mut self) -> (&mut [T], &mut [T]) {
        self.pair_mut(2 * (self.synth_layers + self.modulator_layers))
    }

    fn pair_mut(&mut self, idx: usize) -> (&mut [T], &mut [T]) {
        let (a, b) = self.tensors.split_at_mut(idx + 1);
        (&mut a[idx], &mut b[0])
    }
}

impl Conditioning {
    pub fn name(self) -> &'static str {
        match self {
            Conditioning::Modulated => "modulated",
            Conditioning::Concat => "concat",
            Conditioning::None => "none",
        }
    }
}
