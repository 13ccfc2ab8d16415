//! Losses, auto-decoder and auto-encoder training, and frozen-network
//! latent inference.
//!
//! Training pairs are `(tile, sample)` memberships: a sample in an overlap
//! band is a separate pair for every tile covering it, evaluated at its local
//! coordinate in that tile. Losses are per tile; blending only happens when
//! decoding.

mod encoder;
mod loss;
mod report;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use encoder::{EncoderConfig, EncoderTape, TileEncoder};
pub use loss::{init_latents, psnr, psnr_high_frequency_half, reconstruction_loss, LossKind};
pub use report::{fmt_metric, ReportRow, TrainReport, CSV_HEADER};

use crate::error::{ensure_len, Error, Result};
use crate::model::{backward_batch, forward_batch, ModelConfig, ModelGrads, ModelParams};
use crate::nn::{AdamConfig, AdamState, RngStream, Scalar};
use crate::signals::{bilinear_resample, pixel_center_grid, SampledSignal};
use crate::tiling::{blended_decode_many, Codebook, TileGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    /// `(tile, sample)` pairs per step.
    pub batch_size: usize,
    pub lr_theta: f64,
    pub lr_latent: f64,
    pub loss: LossKind,
    /// Standard deviation of the initial latent entries.
    pub latent_scale: f64,
    pub seed: u64,
    /// Evaluate every this many steps; 0 evaluates only after the last step.
    pub eval_every: usize,
    /// Report zero wall times so reports are byte-reproducible.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 1024,
            lr_theta: 1e-4,
            lr_latent: 1e-3,
            loss: LossKind::L2,
            latent_scale: 1e-2,
            seed: 0,
            eval_every: 0,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::config("steps and batch size must be >= 1"));
        }
        for (name, v) in [
            ("lr_theta", self.lr_theta),
            ("lr_latent", self.lr_latent),
            ("latent_scale", self.latent_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

// Stream tags under the training seed.
const TAG_MODEL: u64 = 1;
const TAG_LATENTS: u64 = 2;
const TAG_BATCHES: u64 = 3;
const TAG_INFER: u64 = 4;
const TAG_ENCODER: u64 = 5;

/// Every `(code, local coordinate, target)` training pair of a signal set.
/// Code `c` is tile `c % tiles` of signal `c / tiles`.
#[derive(Debug, Clone)]
pub struct PairTable {
    pub n: usize,
    pub m: usize,
    pub code: Vec<u32>,
    pub local: Vec<f32>,
    pub target: Vec<f32>,
}

impl PairTable {
    pub fn build(signals: &[SampledSignal], grid: &TileGrid) -> Result<Self> {
        let first = signals.first().ok_or(Error::Empty("signal set"))?;
        let (n, m) = (first.n, first.m);
        ensure_len("signal dimension vs grid", grid.dim(), n)?;
        let tiles = grid.tile_count();
        let mut table = Self {
            n,
            m,
            code: Vec::new(),
            local: Vec::new(),
            target: Vec::new(),
        };
        for (si, s) in signals.iter().enumerate() {
            ensure_len("signal coordinate dimension", n, s.n)?;
            ensure_len("signal value dimension", m, s.m)?;
            if s.is_empty() {
                return Err(Error::Empty("signal"));
            }
            for i in 0..s.len() {
                let p = s.point(i);
                for tile in grid.tiles_containing(p)? {
                    let lin = grid.linear_index(&tile.index);
                    table
                        .code
                        .push(u32::try_from(si * tiles + lin).map_err(|_| Error::config("too many tiles"))?);
                    table.local.extend(tile.to_local(p)?.into_iter().map(|v| v as f32));
                    table.target.extend(s.value(i).iter().map(|&v| v as f32));
                }
            }
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    /// Pair indices grouped by code, in ascending code order.
    fn group(&self, pairs: impl Iterator<Item = usize>) -> BTreeMap<u32, Vec<usize>> {
        let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for p in pairs {
            groups.entry(self.code[p]).or_default().push(p);
        }
        groups
    }

    fn gather(&self, members: &[usize]) -> (Vec<f32>, Vec<f32>) {
        let mut coords = Vec::with_capacity(members.len() * self.n);
        let mut targets = Vec::with_capacity(members.len() * self.m);
        for &p in members {
            coords.extend_from_slice(&self.local[p * self.n..(p + 1) * self.n]);
            targets.extend_from_slice(&self.target[p * self.m..(p + 1) * self.m]);
        }
        (coords, targets)
    }
}

/// Loss of one code's samples, scaled by `scale`, accumulating gradients.
/// Returns the unscaled summed loss.
#[allow(clippy::too_many_arguments)]
pub fn tile_loss_and_grads<T: Scalar>(
    params: &ModelParams<T>,
    coords: &[T],
    targets: &[T],
    z: &[T],
    kind: LossKind,
    scale: T,
    grads: &mut ModelGrads<T>,
    dz: &mut [T],
) -> Result<T> {
    let tape = forward_batch(params, coords, z)?;
    ensure_len("tile targets", tape.output.len(), targets.len())?;
    let mut d_out = vec![T::zero(); targets.len()];
    let loss = loss::loss_into(&tape.output, targets, kind, scale, &mut d_out);
    backward_batch(params, &tape, z, &d_out, grads, dz)?;
    Ok(loss)
}

fn check_inputs(signals: &[SampledSignal], grid: &TileGrid, model: &ModelConfig, train: &TrainConfig) -> Result<()> {
    train.validate()?;
    model.validate()?;
    let first = signals.first().ok_or(Error::Empty("signal set"))?;
    ensure_len("model input dimension", first.n, model.input_dim)?;
    ensure_len("model output dimension", first.m, model.output_dim)?;
    ensure_len("grid dimension", first.n, grid.dim())?;
    for s in signals {
        if s.extent != grid.extent() {
            return Err(Error::config(format!(
                "signal extent {:?} differs from grid extent {:?}",
                s.extent,
                grid.extent()
            )));
        }
    }
    Ok(())
}

fn non_finite(step: usize, code: u32, tiles: usize) -> Error {
    Error::NonFinite(format!(
        "loss at step {step}, signal {}, tile {}",
        code as usize / tiles,
        code as usize % tiles
    ))
}

/// Decodes a dense signal on the `factor`-times finer pixel-center grid.
pub fn decode_dense(params: &ModelParams<f32>, codebook: &Codebook<f32>, factor: usize) -> Result<SampledSignal> {
    let extent = codebook.grid().extent().to_vec();
    let coords = pixel_center_grid(&extent, factor)?;
    let values = blended_decode_many(params, codebook, &coords)?;
    let fine = extent.iter().map(|e| e * factor).collect();
    SampledSignal::dense(fine, params.config().output_dim, values)
}

/// PSNR of the blended reconstruction at 1x, and at 2x against the
/// bilinearly upsampled target (NaN unless the target is a dense image).
pub fn evaluate_psnr(
    params: &ModelParams<f32>,
    codebook: &Codebook<f32>,
    target: &SampledSignal,
) -> Result<(f64, f64)> {
    if !target.dense {
        let pred = blended_decode_many(params, codebook, &target.coords)?;
        return Ok((psnr(&pred, &target.values, 1.0)?, f64::NAN));
    }
    let one = decode_dense(params, codebook, 1)?;
    let p1 = psnr(&one.values, &target.values, 1.0)?;
    let p2 = if target.n == 2 {
        let two = decode_dense(params, codebook, 2)?;
        let gt = bilinear_resample(target, [target.extent[0] * 2, target.extent[1] * 2])?;
        psnr(&two.values, &gt.values, 1.0)?
    } else {
        f64::NAN
    };
    Ok((p1, p2))
}

struct Evaluator {
    start: Instant,
    deterministic: bool,
    every: usize,
    steps: usize,
}

impl Evaluator {
    fn due(&self, step: usize) -> bool {
        step == self.steps || (self.every > 0 && step.is_multiple_of(self.every))
    }

    fn row(&self, step: usize, loss: f64, psnrs: &[(f64, f64)]) -> ReportRow {
        let k = psnrs.len() as f64;
        ReportRow {
            step,
            loss,
            psnr_1x: psnrs.iter().map(|p| p.0).sum::<f64>() / k,
            psnr_2x: psnrs.iter().map(|p| p.1).sum::<f64>() / k,
            wall_ms: if self.deterministic {
                0
            } else {
                self.start.elapsed().as_millis() as u64
            },
        }
    }
}

fn split_codebooks(grid: &TileGrid, d: usize, latents: &[f32], count: usize) -> Result<Vec<Codebook<f32>>> {
    let per = grid.tile_count() * d;
    (0..count)
        .map(|s| Codebook::from_codes(grid.clone(), d, latents[s * per..(s + 1) * per].to_vec()))
        .collect()
}

/// Jointly fits the network and one latent code per tile of every signal.
pub fn train_autodecoder(
    signals: &[SampledSignal],
    grid: &TileGrid,
    model: &ModelConfig,
    train: &TrainConfig,
) -> Result<(ModelParams<f32>, Vec<Codebook<f32>>, TrainReport)> {
    check_inputs(signals, grid, model, train)?;
    let root = RngStream::new(train.seed);
    let mut params: ModelParams<f32> = ModelParams::init(*model, &mut root.derive(TAG_MODEL))?;
    let table = PairTable::build(signals, grid)?;
    if table.is_empty() {
        return Err(Error::Empty("training pairs"));
    }
    let d = model.latent_dim;
    let tiles = grid.tile_count();
    let codes = signals.len() * tiles;
    let mut latents: Vec<f32> = init_latents(codes, d, train.latent_scale, &mut root.derive(TAG_LATENTS))?.concat();

    let mut theta_opt = AdamState::<f32>::new(AdamConfig::with_lr(train.lr_theta), &params.tensor_shapes());
    let mut latent_opt = AdamState::<f32>::new(AdamConfig::with_lr(train.lr_latent), &[latents.len()]);
    let mut grads = params.zero_grads();
    let mut d_latents = vec![0.0f32; latents.len()];
    let mut rng = root.derive(TAG_BATCHES);
    let eval = Evaluator {
        start: Instant::now(),
        deterministic: train.deterministic,
        every: train.eval_every,
        steps: train.steps,
    };
    let mut report = TrainReport::default();
    let scale = 1.0 / train.batch_size as f32;

    for step in 1..=train.steps {
        grads.zero();
        let groups = table.group((0..train.batch_size).map(|_| rng.index(table.len())));
        let mut total = 0.0f64;
        for (&code, members) in &groups {
            let (coords, targets) = table.gather(members);
            let c = code as usize;
            let z = &latents[c * d..(c + 1) * d];
            let dz = &mut d_latents[c * d..(c + 1) * d];
            let loss = tile_loss_and_grads(&params, &coords, &targets, z, train.loss, scale, &mut grads, dz)?;
            if !loss.is_finite() {
                return Err(non_finite(step, code, tiles));
            }
            total += f64::from(loss);
        }
        theta_opt.step(&mut params.tensors_mut(), &grads.tensors())?;
        latent_opt.step(&mut [&mut latents], &[&d_latents])?;
        for &code in groups.keys() {
            let c = code as usize;
            d_latents[c * d..(c + 1) * d].fill(0.0);
        }
        let loss = total / train.batch_size as f64;
        report.losses.push(loss);
        if eval.due(step) {
            let books = split_codebooks(grid, d, &latents, signals.len())?;
            let psnrs = signals
                .iter()
                .zip(&books)
                .map(|(s, b)| evaluate_psnr(&params, b, s))
                .collect::<Result<Vec<_>>>()?;
            report.rows.push(eval.row(step, loss, &psnrs));
        }
    }
    let books = split_codebooks(grid, d, &latents, signals.len())?;
    Ok((params, books, report))
}

/// Optimizes one tile's code with the network frozen, using every pair of
/// the tile each step. The initial code comes from a stream keyed by
/// `(seed, tile)`, so tiles can be inferred in any order.
pub fn infer_tile_latent(
    params: &ModelParams<f32>,
    coords: &[f32],
    targets: &[f32],
    tile: usize,
    train: &TrainConfig,
) -> Result<Vec<f32>> {
    train.validate()?;
    let d = params.config().latent_dim;
    let mut rng = RngStream::new(train.seed).derive(TAG_INFER).derive(tile as u64);
    let mut z = init_latents(1, d, train.latent_scale, &mut rng)?.remove(0);
    if coords.is_empty() {
        return Ok(z);
    }
    let rows = targets.len() / params.config().output_dim;
    let scale = 1.0 / rows as f32;
    let mut opt = AdamState::<f32>::new(AdamConfig::with_lr(train.lr_latent), &[d]);
    let mut scratch = params.zero_grads();
    let mut dz = vec![0.0f32; d];
    for step in 1..=train.steps {
        dz.fill(0.0);
        scratch.zero();
        let loss = tile_loss_and_grads(params, coords, targets, &z, train.loss, scale, &mut scratch, &mut dz)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at inference step {step}, tile {tile}")));
        }
        opt.step(&mut [&mut z], &[&dz])?;
    }
    Ok(z)
}

/// Fits a codebook for `signal` with the network frozen.
pub fn infer_latents(
    params: &ModelParams<f32>,
    signal: &SampledSignal,
    grid: &TileGrid,
    train: &TrainConfig,
) -> Result<Codebook<f32>> {
    check_inputs(std::slice::from_ref(signal), grid, params.config(), train)?;
    let table = PairTable::build(std::slice::from_ref(signal), grid)?;
    let d = params.config().latent_dim;
    let mut codes = vec![0.0f32; grid.tile_count() * d];
    let groups = table.group(0..table.len());
    for tile in 0..grid.tile_count() {
        let (coords, targets) = match groups.get(&(tile as u32)) {
            Some(members) => table.gather(members),
            None => (Vec::new(), Vec::new()),
        };
        let z = infer_tile_latent(params, &coords, &targets, tile, train)?;
        codes[tile * d..(tile + 1) * d].copy_from_slice(&z);
    }
    Codebook::from_codes(grid.clone(), d, codes)
}

/// Sample values of every tile of a dense signal, flattened with axis 0
/// fastest and channels innermost: `tiles x (product(tile_size) * m)`.
pub fn tile_inputs(signal: &SampledSignal, grid: &TileGrid) -> Result<Vec<f32>> {
    if !signal.dense {
        return Err(Error::config("tile encoding needs a dense signal"));
    }
    ensure_len("signal dimension vs grid", grid.dim(), signal.n)?;
    if signal.extent != grid.extent() {
        return Err(Error::config("signal extent differs from grid extent"));
    }
    let m = signal.m;
    let size = grid.tile_size();
    let vol = grid.tile_volume();
    let mut out = Vec::with_capacity(grid.tile_count() * vol * m);
    for tile in grid.tiles() {
        let mut k = vec![0usize; size.len()];
        for _ in 0..vol {
            let mut lin = 0;
            for a in (0..size.len()).rev() {
                lin = lin * signal.extent[a] + tile.origin[a] + k[a];
            }
            out.extend(signal.value(lin).iter().map(|&v| v as f32));
            for (a, ka) in k.iter_mut().enumerate() {
                *ka += 1;
                if *ka < size[a] {
                    break;
                }
                *ka = 0;
            }
        }
    }
    Ok(out)
}

/// Encoder input size for `grid` and `m` channels.
pub fn encoder_input_dim(grid: &TileGrid, m: usize) -> usize {
    grid.tile_volume() * m
}

/// One forward pass of the encoder per tile; no optimization.
pub fn encode_tiles(encoder: &TileEncoder<f32>, signal: &SampledSignal, grid: &TileGrid) -> Result<Codebook<f32>> {
    let inputs = tile_inputs(signal, grid)?;
    let codes = encoder.encode(&inputs)?;
    Codebook::from_codes(grid.clone(), encoder.config().latent_dim, codes)
}

/// Loss of one tile under an encoder-predicted code, with gradients for
/// the network and the encoder.
#[allow(clippy::too_many_arguments)]
pub fn autoencoder_tile_loss<T: Scalar>(
    params: &ModelParams<T>,
    encoder: &TileEncoder<T>,
    tile_input: &[T],
    coords: &[T],
    targets: &[T],
    kind: LossKind,
    scale: T,
    grads: &mut ModelGrads<T>,
    encoder_grads: &mut [Vec<T>],
) -> Result<T> {
    let (z, tape) = encoder.forward_taped(tile_input)?;
    let mut dz = vec![T::zero(); z.len()];
    let loss = tile_loss_and_grads(params, coords, targets, &z, kind, scale, grads, &mut dz)?;
    encoder.backward(&tape, &dz, encoder_grads)?;
    Ok(loss)
}

/// Trains network and encoder end to end; codes come from the encoder.
pub fn train_autoencoder(
    signals: &[SampledSignal],
    grid: &TileGrid,
    hidden: usize,
    model: &ModelConfig,
    train: &TrainConfig,
) -> Result<(ModelParams<f32>, TileEncoder<f32>, TrainReport)> {
    check_inputs(signals, grid, model, train)?;
    let root = RngStream::new(train.seed);
    let mut params: ModelParams<f32> = ModelParams::init(*model, &mut root.derive(TAG_MODEL))?;
    let enc_cfg = EncoderConfig {
        input_dim: encoder_input_dim(grid, model.output_dim),
        hidden,
        latent_dim: model.latent_dim,
    };
    let mut encoder = TileEncoder::<f32>::init(enc_cfg, &mut root.derive(TAG_ENCODER))?;
    let table = PairTable::build(signals, grid)?;
    let inputs: Vec<f32> = signals
        .iter()
        .map(|s| tile_inputs(s, grid))
        .collect::<Result<Vec<_>>>()?
        .concat();
    let din = enc_cfg.input_dim;
    let d = model.latent_dim;
    let tiles = grid.tile_count();

    let mut theta_opt = AdamState::<f32>::new(AdamConfig::with_lr(train.lr_theta), &params.tensor_shapes());
    let mut enc_opt = AdamState::<f32>::new(AdamConfig::with_lr(train.lr_theta), &encoder.tensor_shapes());
    let mut grads = params.zero_grads();
    let mut enc_grads = encoder.zero_grads();
    let mut rng = root.derive(TAG_BATCHES);
    let eval = Evaluator {
        start: Instant::now(),
        deterministic: train.deterministic,
        every: train.eval_every,
        steps: train.steps,
    };
    let mut report = TrainReport::default();
    let scale = 1.0 / train.batch_size as f32;

    for step in 1..=train.steps {
        grads.zero();
        enc_grads.iter_mut().for_each(|g| g.fill(0.0));
        let groups = table.group((0..train.batch_size).map(|_| rng.index(table.len())));
        let touched: Vec<u32> = groups.keys().copied().collect();
        let mut batch_in = Vec::with_capacity(touched.len() * din);
        for &c in &touched {
            batch_in.extend_from_slice(&inputs[c as usize * din..(c as usize + 1) * din]);
        }
        let (z_all, tape) = encoder.forward_taped(&batch_in)?;
        let mut dz_all = vec![0.0f32; z_all.len()];
        let mut total = 0.0f64;
        for (row, (&code, members)) in groups.iter().enumerate() {
            let (coords, targets) = table.gather(members);
            let z = &z_all[row * d..(row + 1) * d];
            let dz = &mut dz_all[row * d..(row + 1) * d];
            let loss = tile_loss_and_grads(&params, &coords, &targets, z, train.loss, scale, &mut grads, dz)?;
            if !loss.is_finite() {
                return Err(non_finite(step, code, tiles));
            }
            total += f64::from(loss);
        }
        encoder.backward(&tape, &dz_all, &mut enc_grads)?;
        theta_opt.step(&mut params.tensors_mut(), &grads.tensors())?;
        let enc_refs: Vec<&[f32]> = enc_grads.iter().map(Vec::as_slice).collect();
        enc_opt.step(&mut encoder.tensors_mut(), &enc_refs)?;
        let loss = total / train.batch_size as f64;
        report.losses.push(loss);
        if eval.due(step) {
            let psnrs = signals
                .iter()
                .map(|s| evaluate_psnr(&params, &encode_tiles(&encoder, s, grid)?, s))
                .collect::<Result<Vec<_>>>()?;
            report.rows.push(eval.row(step, loss, &psnrs));
        }
    }
    Ok((params, encoder, report))
}

#[cfg(test)]
mod tests;
