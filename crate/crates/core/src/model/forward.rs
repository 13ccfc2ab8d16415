//! Per-sample forward and backward passes.
//!
//! Synthesis layer `i` computes `h_i = alpha_i * act(W_i h_{i-1} + b_i)` with
//! `alpha_i = 1` when unmodulated, followed by an unmodulated linear output
//! layer. The modulator computes
//!
//! ```text
//! h'_0     = relu(W'_0 z + b'_0)
//! h'_{i+1} = relu(W'_{i+1} [h'_i, z] + b'_{i+1}),   alpha_{i+1} = h'_{i+1}
//! ```
//!
//! so `z` reaches every modulator layer through a skip connection.

use super::config::{Conditioning, InputEncoding};
use super::params::{ModelGrads, ModelParams};
use crate::error::{ensure_len, Error, Result};
use crate::nn::{axpy, dot, Activation, Scalar};

/// Amplitudes produced by the modulator plus its cached pre-activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSignals<T> {
    /// `alpha_1..alpha_K`.
    pub alphas: Vec<Vec<T>>,
    /// `h'_0`, the stem output (not itself a modulation signal).
    pub stem: Vec<T>,
    /// Pre-activation of every modulator layer, stem first.
    pub preacts: Vec<Vec<T>>,
}

/// Cached values of one synthesis forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTape<T> {
    /// `h_0`, the synthesis input after encoding/concatenation.
    pub input: Vec<T>,
    pub preacts: Vec<Vec<T>>,
    /// `act(pre_i)` before modulation.
    pub activations: Vec<Vec<T>>,
    /// `h_i` after modulation.
    pub hidden: Vec<Vec<T>>,
    pub output: Vec<T>,
    pub modulated: bool,
}

/// Everything `model_backward` needs for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTape<T> {
    pub synth: ForwardTape<T>,
    pub modulation: Option<ModulationSignals<T>>,
    pub latent: Vec<T>,
}

/// `[cos(2 pi B x), sin(2 pi B x)]` with `B` stored row-major `[feature_count x n]`.
pub fn fourier_encode<T: Scalar>(x: &[T], b: &[T], feature_count: usize) -> Result<Vec<T>> {
    ensure_len("fourier matrix", feature_count * x.len(), b.len())?;
    let two_pi = T::from_f64(std::f64::consts::TAU);
    let proj: Vec<T> = if x.is_empty() {
        vec![T::zero(); feature_count]
    } else {
        b.chunks_exact(x.len()).map(|row| two_pi * dot(row, x)).collect()
    };
    let mut out = Vec::with_capacity(2 * feature_count);
    out.extend(proj.iter().map(|v| v.cos()));
    out.extend(proj.iter().map(|v| v.sin()));
    Ok(out)
}

impl<T: Scalar> ModelParams<T> {
    /// Coordinate features fed to the synthesis network (raw or Fourier).
    pub fn encode_coords(&self, x: &[T]) -> Result<Vec<T>> {
        ensure_len("coordinate", self.config().input_dim, x.len())?;
        match self.config().input_encoding {
            InputEncoding::Raw => Ok(x.to_vec()),
            InputEncoding::FourierFeatures { feature_count, .. } => {
                let b = self.fourier_matrix().expect("validated at construction");
                fourier_encode(x, b, feature_count)
            }
        }
    }

    /// Builds `h_0` from a coordinate and latent code.
    pub fn synth_input(&self, x: &[T], z: &[T]) -> Result<Vec<T>> {
        let mut h0 = self.encode_coords(x)?;
        if self.config().conditioning == Conditioning::Concat {
            ensure_len("latent code", self.config().latent_dim, z.len())?;
            h0.extend_from_slice(z);
        }
        Ok(h0)
    }

    fn check_latent(&self, z: &[T]) -> Result<()> {
        if self.config().uses_latent() {
            ensure_len("latent code", self.config().latent_dim, z.len())?;
        }
        Ok(())
    }
}

pub fn modulator_forward<T: Scalar>(params: &ModelParams<T>, z: &[T]) -> Result<ModulationSignals<T>> {
    if !params.config().is_modulated() {
        return Err(Error::config("modulator_forward requires a modulated model"));
    }
    ensure_len("latent code", params.config().latent_dim, z.len())?;
    let layers = params.modulator_layers();
    let stem_pre = layers[0].preactivate(z)?;
    let stem: Vec<T> = stem_pre.iter().map(|&v| Activation::Relu.apply(v)).collect();
    let mut preacts = vec![stem_pre];
    let mut alphas = Vec::with_capacity(layers.len() - 1);
    let mut prev = stem.clone();
    let mut cat = Vec::with_capacity(prev.len() + z.len());
    for layer in &layers[1..] {
        cat.clear();
        cat.extend_from_slice(&prev);
        cat.extend_from_slice(z);
        let pre = layer.preactivate(&cat)?;
        let h: Vec<T> = pre.iter().map(|&v| Activation::Relu.apply(v)).collect();
        preacts.push(pre);
        alphas.push(h.clone());
        prev = h;
    }
    Ok(ModulationSignals { alphas, stem, preacts })
}

/// Runs the synthesis network on `h_0` (the encoded coordinate, with `z`
/// appended for concatenation conditioning).
pub fn synthesizer_forward<T: Scalar>(
    params: &ModelParams<T>,
    input: &[T],
    alphas: Option<&[Vec<T>]>,
) -> Result<ForwardTape<T>> {
    let cfg = params.config();
    ensure_len("synthesis input", cfg.synth_input_dim(), input.len())?;
    let modulated = cfg.is_modulated();
    let alphas = match (modulated, alphas) {
        (true, None) => return Err(Error::config("modulated synthesis requires alphas")),
        (true, Some(a)) => {
            ensure_len("alpha count", cfg.hidden_layers, a.len())?;
            for ai in a {
                ensure_len("alpha width", cfg.width, ai.len())?;
            }
            Some(a)
        }
        (false, _) => None,
    };
    let k = cfg.hidden_layers;
    let mut preacts = Vec::with_capacity(k);
    let mut activations = Vec::with_capacity(k);
    let mut hidden: Vec<Vec<T>> = Vec::with_capacity(k);
    for (i, layer) in params.synth_layers().iter().enumerate() {
        let prev = if i == 0 { input } else { &hidden[i - 1] };
        let pre = layer.preactivate(prev)?;
        let act: Vec<T> = pre.iter().map(|&v| layer.activation().apply(v)).collect();
        let h = match alphas {
            Some(a) => act.iter().zip(&a[i]).map(|(s, al)| *s * *al).collect(),
            None => act.clone(),
        };
        preacts.push(pre);
        activations.push(act);
        hidden.push(h);
    }
    let output = params.output_layer().preactivate(&hidden[k - 1])?;
    Ok(ForwardTape {
        input: input.to_vec(),
        preacts,
        activations,
        hidden,
        output,
        modulated,
    })
}

pub fn model_forward_taped<T: Scalar>(params: &ModelParams<T>, x: &[T], z: &[T]) -> Result<ModelTape<T>> {
    params.check_latent(z)?;
    let h0 = params.synth_input(x, z)?;
    let modulation = if params.config().is_modulated() {
        Some(modulator_forward(params, z)?)
    } else {
        None
    };
    let synth = synthesizer_forward(params, &h0, modulation.as_ref().map(|m| m.alphas.as_slice()))?;
    Ok(ModelTape {
        synth,
        modulation,
        latent: if params.config().uses_latent() {
            z.to_vec()
        } else {
            Vec::new()
        },
    })
}

/// `f(x; z)`. `z` is ignored (and may be empty) for unconditioned models.
pub fn model_forward<T: Scalar>(params: &ModelParams<T>, x: &[T], z: &[T]) -> Result<Vec<T>> {
    Ok(model_forward_taped(params, x, z)?.synth.output)
}

/// Pre-activation of the first synthesis layer of a concatenation model:
/// `W_x enc(x) + W_z z + b`.
pub fn concat_first_layer_preact<T: Scalar>(params: &ModelParams<T>, x: &[T], z: &[T]) -> Result<Vec<T>> {
    if params.config().conditioning != Conditioning::Concat {
        return Err(Error::config(
            "concat_first_layer_preact requires concatenation conditioning",
        ));
    }
    let h0 = params.synth_input(x, z)?;
    params.synth_layers()[0].preactivate(&h0)
}

/// Backpropagates `d_output` through the synthesis network.
///
/// Accumulates parameter gradients into `grads`, returns `dL/dalpha_i`
/// (empty when unmodulated) and `dL/dh_0`.
pub fn synthesizer_backward<T: Scalar>(
    params: &ModelParams<T>,
    tape: &ForwardTape<T>,
    alphas: Option<&[Vec<T>]>,
    d_output: &[T],
    grads: &mut ModelGrads<T>,
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let cfg = params.config();
    ensure_len("output gradient", cfg.output_dim, d_output.len())?;
    ensure_len("tape layers", cfg.hidden_layers, tape.hidden.len())?;
    ensure_len("tape output", cfg.output_dim, tape.output.len())?;
    ensure_len("tape input", cfg.synth_input_dim(), tape.input.len())?;
    if tape.modulated != cfg.is_modulated() {
        return Err(Error::config("tape was recorded with a different conditioning mode"));
    }
    let alphas = if tape.modulated {
        let a = alphas.ok_or_else(|| Error::config("modulated backward requires alphas"))?;
        ensure_len("alpha count", cfg.hidden_layers, a.len())?;
        Some(a)
    } else {
        None
    };
    let k = cfg.hidden_layers;

    let out = params.output_layer();
    let mut dh = vec![T::zero(); out.in_dim()];
    {
        let (dw, db) = grads.output_mut();
        let h_last = &tape.hidden[k - 1];
        for (r, &g) in d_output.iter().enumerate() {
            axpy(g, h_last, &mut dw[r * out.in_dim()..(r + 1) * out.in_dim()]);
            db[r] += g;
            axpy(g, out.row(r), &mut dh);
        }
    }

    let mut d_alphas = Vec::new();
    if alphas.is_some() {
        d_alphas = vec![Vec::new(); k];
    }
    for i in (0..k).rev() {
        let layer = &params.synth_layers()[i];
        ensure_len("tape hidden width", layer.out_dim(), tape.hidden[i].len())?;
        let mut d_pre = dh;
        if let Some(a) = alphas {
            d_alphas[i] = d_pre.iter().zip(&tape.activations[i]).map(|(g, s)| *g * *s).collect();
            for (g, al) in d_pre.iter_mut().zip(&a[i]) {
                *g *= *al;
            }
        }
        for (g, &p) in d_pre.iter_mut().zip(&tape.preacts[i]) {
            *g *= layer.activation().derivative(p);
        }
        let prev: &[T] = if i == 0 { &tape.input } else { &tape.hidden[i - 1] };
        let mut d_prev = vec![T::zero(); layer.in_dim()];
        let (dw, db) = grads.synth_mut(i);
        for (r, &g) in d_pre.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            axpy(g, prev, &mut dw[r * layer.in_dim()..(r + 1) * layer.in_dim()]);
            db[r] += g;
            axpy(g, layer.row(r), &mut d_prev);
        }
        dh = d_prev;
    }
    Ok((d_alphas, dh))
}

/// Backpropagates `dL/dalpha_i` through the modulator, accumulating into
/// `grads` and `d_latent`. Every layer's skip connection contributes to `d_latent`.
pub fn modulator_backward<T: Scalar>(
    params: &ModelParams<T>,
    signals: &ModulationSignals<T>,
    z: &[T],
    d_alphas: &[Vec<T>],
    grads: &mut ModelGrads<T>,
    d_latent: &mut [T],
) -> Result<()> {
    let cfg = params.config();
    let (w, d) = (cfg.width, cfg.latent_dim);
    ensure_len("latent code", d, z.len())?;
    ensure_len("latent gradient", d, d_latent.len())?;
    ensure_len("alpha gradient count", cfg.hidden_layers, d_alphas.len())?;
    ensure_len("modulator tape", cfg.hidden_layers + 1, signals.preacts.len())?;
    let layers = params.modulator_layers();
    let mut carry = vec![T::zero(); w];
    let mut cat = Vec::with_capacity(w + d);
    for li in (1..layers.len()).rev() {
        let layer = &layers[li];
        ensure_len("alpha gradient width", w, d_alphas[li - 1].len())?;
        let mut d_pre: Vec<T> = d_alphas[li - 1].iter().zip(&carry).map(|(a, c)| *a + *c).collect();
        for (g, &p) in d_pre.iter_mut().zip(&signals.preacts[li]) {
            *g *= Activation::Relu.derivative(p);
        }
        let prev = if li == 1 {
            &signals.stem
        } else {
            &signals.alphas[li - 2]
        };
        cat.clear();
        cat.extend_from_slice(prev);
        cat.extend_from_slice(z);
        let mut d_cat = vec![T::zero(); w + d];
        let (dw, db) = grads.modulator_mut(li);
        for (r, &g) in d_pre.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            axpy(g, &cat, &mut dw[r * (w + d)..(r + 1) * (w + d)]);
            db[r] += g;
            axpy(g, layer.row(r), &mut d_cat);
        }
        carry.copy_from_slice(&d_cat[..w]);
        for (dz, g) in d_latent.iter_mut().zip(&d_cat[w..]) {
            *dz += *g;
        }
    }
    let stem = &layers[0];
    let mut d_pre = carry;
    for (g, &p) in d_pre.iter_mut().zip(&signals.preacts[0]) {
        *g *= Activation::Relu.derivative(p);
    }
    let (dw, db) = grads.modulator_mut(0);
    for (r, &g) in d_pre.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        axpy(g, z, &mut dw[r * d..(r + 1) * d]);
        db[r] += g;
        axpy(g, stem.row(r), d_latent);
    }
    Ok(())
}

/// Accumulates the gradient of one sample into `grads` and `d_latent`.
pub fn model_backward_into<T: Scalar>(
    params: &ModelParams<T>,
    tape: &ModelTape<T>,
    d_output: &[T],
    grads: &mut ModelGrads<T>,
    d_latent: &mut [T],
) -> Result<()> {
    let cfg = params.config();
    if cfg.uses_latent() {
        ensure_len("latent gradient", cfg.latent_dim, d_latent.len())?;
        ensure_len("tape latent", cfg.latent_dim, tape.latent.len())?;
    }
    let alphas = tape.modulation.as_ref().map(|m| m.alphas.as_slice());
    let (d_alphas, d_input) = synthesizer_backward(params, &tape.synth, alphas, d_output, grads)?;
    match cfg.conditioning {
        Conditioning::Modulated => {
            let signals = tape.modulation.as_ref().expect("modulated tape has signals");
            modulator_backward(params, signals, &tape.latent, &d_alphas, grads, d_latent)?;
        }
        Conditioning::Concat => {
            let offset = cfg.coord_features();
            for (dz, g) in d_latent.iter_mut().zip(&d_input[offset..]) {
                *dz += *g;
            }
        }
        Conditioning::None => {}
    }
    Ok(())
}

/// Full gradient of one sample: parameter gradients and `dL/dz`.
pub fn model_backward<T: Scalar>(
    params: &ModelParams<T>,
    tape: &ModelTape<T>,
    d_output: &[T],
) -> Result<(ModelGrads<T>, Vec<T>)> {
    let mut grads = params.zero_grads();
    let mut dz = vec![
        T::zero();
        if params.config().uses_latent() {
            params.config().latent_dim
        } else {
            0
        }
    ];
    model_backward_into(params, tape, d_output, &mut grads, &mut dz)?;
    Ok((grads, dz))
}
