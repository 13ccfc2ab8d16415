//! Batched evaluation of many coordinates that share one latent code.
//!
//! Results equal per-sample application of [`model_forward`](super::model_forward);
//! the modulator runs once per batch since its input is the shared code.

use super::config::Conditioning;
use super::forward::{modulator_backward, modulator_forward, ModulationSignals};
use super::params::{ModelGrads, ModelParams};
use crate::error::{ensure_len, Result};
use crate::nn::{gemm, Layout, Scalar};

/// Row-major activations of a batched synthesis pass.
#[derive(Debug, Clone)]
pub struct BatchTape<T> {
    pub rows: usize,
    pub input: Vec<T>,
    pub preacts: Vec<Vec<T>>,
    pub activations: Vec<Vec<T>>,
    pub hidden: Vec<Vec<T>>,
    pub output: Vec<T>,
    pub modulation: Option<ModulationSignals<T>>,
}

/// Builds the `rows x synth_input_dim` input matrix for coordinates sharing `z`.
pub fn batch_input<T: Scalar>(params: &ModelParams<T>, coords: &[T], z: &[T]) -> Result<(usize, Vec<T>)> {
    let cfg = params.config();
    let n = cfg.input_dim;
    if !coords.len().is_multiple_of(n) {
        return Err(crate::Error::dims(
            "batched coordinates",
            n * (coords.len() / n + 1),
            coords.len(),
        ));
    }
    let rows = coords.len() / n;
    let mut input = Vec::with_capacity(rows * cfg.synth_input_dim());
    for x in coords.chunks_exact(n) {
        input.extend(params.synth_input(x, z)?);
    }
    Ok((rows, input))
}

/// Forward pass for `coords` (row-major, `rows x n`) under one latent code.
pub fn forward_batch<T: Scalar>(params: &ModelParams<T>, coords: &[T], z: &[T]) -> Result<BatchTape<T>> {
    let cfg = params.config();
    if cfg.uses_latent() {
        ensure_len("latent code", cfg.latent_dim, z.len())?;
    }
    let (rows, input) = batch_input(params, coords, z)?;
    let modulation = if cfg.is_modulated() {
        Some(modulator_forward(params, z)?)
    } else {
        None
    };
    let k = cfg.hidden_layers;
    let mut preacts = Vec::with_capacity(k);
    let mut activations = Vec::with_capacity(k);
    let mut hidden: Vec<Vec<T>> = Vec::with_capacity(k);
    for (i, layer) in params.synth_layers().iter().enumerate() {
        let prev: &[T] = if i == 0 { &input } else { &hidden[i - 1] };
        let (din, dout) = (layer.in_dim(), layer.out_dim());
        let mut pre = vec![T::zero(); rows * dout];
        for row in pre.chunks_exact_mut(dout) {
            row.copy_from_slice(layer.bias());
        }
        gemm(
            rows,
            din,
            dout,
            T::one(),
            prev,
            Layout::Normal,
            layer.weights(),
            Layout::Transposed,
            T::one(),
            &mut pre,
        );
        let act_kind = layer.activation();
        let act: Vec<T> = pre.iter().map(|&v| act_kind.apply(v)).collect();
        let h = match &modulation {
            Some(m) => {
                let alpha = &m.alphas[i];
                let mut h = act.clone();
                for row in h.chunks_exact_mut(dout) {
                    for (v, a) in row.iter_mut().zip(alpha) {
                        *v *= *a;
                    }
                }
                h
            }
            None => act.clone(),
        };
        preacts.push(pre);
        activations.push(act);
        hidden.push(h);
    }
    let out = params.output_layer();
    let mut output = vec![T::zero(); rows * out.out_dim()];
    for row in output.chunks_exact_mut(out.out_dim()) {
        row.copy_from_slice(out.bias());
    }
    gemm(
        rows,
        out.in_dim(),
        out.out_dim(),
        T::one(),
        &hidden[k - 1],
        Layout::Normal,
        out.weights(),
        Layout::Transposed,
        T::one(),
        &mut output,
    );
    Ok(BatchTape {
        rows,
        input,
        preacts,
        activations,
        hidden,
        output,
        modulation,
    })
}

/// Backward pass for a batch sharing latent `z`.
///
/// `d_output` is `rows x m`. Parameter gradients are summed over rows into
/// `grads`; the latent gradient is summed into `d_latent` (ignored for
/// unconditioned models).
pub fn backward_batch<T: Scalar>(
    params: &ModelParams<T>,
    tape: &BatchTape<T>,
    z: &[T],
    d_output: &[T],
    grads: &mut ModelGrads<T>,
    d_latent: &mut [T],
) -> Result<()> {
    let cfg = params.config();
    let rows = tape.rows;
    let k = cfg.hidden_layers;
    ensure_len("batched output gradient", rows * cfg.output_dim, d_output.len())?;
    ensure_len("batch tape layers", k, tape.hidden.len())?;

    let out = params.output_layer();
    {
        let (dw, db) = grads.output_mut();
        gemm(
            out.out_dim(),
            rows,
            out.in_dim(),
            T::one(),
            d_output,
            Layout::Transposed,
            &tape.hidden[k - 1],
            Layout::Normal,
            T::one(),
            dw,
        );
        for row in d_output.chunks_exact(out.out_dim()) {
            for (b, g) in db.iter_mut().zip(row) {
                *b += *g;
            }
        }
    }
    let mut dh = vec![T::zero(); rows * out.in_dim()];
    gemm(
        rows,
        out.out_dim(),
        out.in_dim(),
        T::one(),
        d_output,
        Layout::Normal,
        out.weights(),
        Layout::Normal,
        T::zero(),
        &mut dh,
    );

    let mut d_alphas: Vec<Vec<T>> = Vec::new();
    if tape.modulation.is_some() {
        d_alphas = vec![vec![T::zero(); cfg.width]; k];
    }
    let mut d_input: Vec<T> = Vec::new();
    for i in (0..k).rev() {
        let layer = &params.synth_layers()[i];
        let (din, dout) = (layer.in_dim(), layer.out_dim());
        let mut d_pre = dh;
        if let Some(m) = &tape.modulation {
            let alpha = &m.alphas[i];
            let da = &mut d_alphas[i];
            for (g_row, s_row) in d_pre.chunks_exact_mut(dout).zip(tape.activations[i].chunks_exact(dout)) {
                for j in 0..dout {
                    da[j] += g_row[j] * s_row[j];
                    g_row[j] *= alpha[j];
                }
            }
        }
        let act_kind = layer.activation();
        for (g, &p) in d_pre.iter_mut().zip(&tape.preacts[i]) {
            *g *= act_kind.derivative(p);
        }
        let prev: &[T] = if i == 0 { &tape.input } else { &tape.hidden[i - 1] };
        {
            let (dw, db) = grads.synth_mut(i);
            gemm(
                dout,
                rows,
                din,
                T::one(),
                &d_pre,
                Layout::Transposed,
                prev,
                Layout::Normal,
                T::one(),
                dw,
            );
            for row in d_pre.chunks_exact(dout) {
                for (b, g) in db.iter_mut().zip(row) {
                    *b += *g;
                }
            }
        }
        let need_prev = i > 0 || cfg.conditioning == Conditioning::Concat;
        if need_prev {
            let mut d_prev = vec![T::zero(); rows * din];
            gemm(
                rows,
                dout,
                din,
                T::one(),
                &d_pre,
                Layout::Normal,
                layer.weights(),
                Layout::Normal,
                T::zero(),
                &mut d_prev,
            );
            if i == 0 {
                d_input = d_prev;
                dh = Vec::new();
            } else {
                dh = d_prev;
            }
        } else {
            dh = Vec::new();
        }
    }

    match cfg.conditioning {
        Conditioning::Modulated => {
            let m = tape.modulation.as_ref().expect("modulated tape");
            modulator_backward(params, m, z, &d_alphas, grads, d_latent)?;
        }
        Conditioning::Concat => {
            ensure_len("latent gradient", cfg.latent_dim, d_latent.len())?;
            let width = cfg.synth_input_dim();
            let offset = cfg.coord_features();
            for row in d_input.chunks_exact(width) {
                for (dz, g) in d_latent.iter_mut().zip(&row[offset..]) {
                    *dz += *g;
                }
            }
        }
        Conditioning::None => {}
    }
    Ok(())
}

/// Evaluates `f(x; z)` for every row of `coords`.
pub fn predict_batch<T: Scalar>(params: &ModelParams<T>, coords: &[T], z: &[T]) -> Result<Vec<T>> {
    Ok(forward_batch(params, coords, z)?.output)
}
