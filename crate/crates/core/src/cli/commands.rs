use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use super::config::{ExperimentConfig, FfnSettings, FitMode, ModelSettings};
use crate::error::{Error, Result};
use crate::format::{write_atomic, Checkpoint, CodebookFile};
use crate::model::{Conditioning, InputEncoding, ModelParams, SynthActivation};
use crate::signals::{
    chamfer_distance, load_image, load_points, save_image, sdf_grid_metrics, world_to_grid, SampledSignal, SdfShape,
};
use crate::tiling::{blended_decode_many, Codebook, TileGrid};
use crate::training::{
    decode_dense, encode_tiles, evaluate_psnr, fmt_metric, infer_latents, psnr, psnr_high_frequency_half,
    train_autodecoder, train_autoencoder, TrainConfig, TrainReport,
};

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Files written by `fit`.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub checkpoint: PathBuf,
    pub codebooks: Vec<PathBuf>,
    pub metrics: PathBuf,
    pub report: TrainReport,
}

/// Trains on the configured data and writes `model.modf`,
/// `codebook_<i>.modz` per signal and `metrics.csv` into the output directory.
pub fn cmd_fit(config: &ExperimentConfig, out: &mut dyn Write) -> Result<FitOutput> {
    config.validate()?;
    let signals = config.load_data()?;
    let (grid, model) = config.resolve(&signals)?;
    let train = config.train;
    let (checkpoint, books, report) = match config.mode {
        FitMode::Autodecoder => {
            let (params, books, report) = train_autodecoder(&signals, &grid, &model, &train)?;
            (checkpoint(params, None, &grid, &train), books, report)
        }
        FitMode::Autoencoder => {
            let (params, encoder, report) = train_autoencoder(&signals, &grid, config.encoder_hidden, &model, &train)?;
            let books = signals
                .iter()
                .map(|s| encode_tiles(&encoder, s, &grid))
                .collect::<Result<Vec<_>>>()?;
            (checkpoint(params, Some(encoder), &grid, &train), books, report)
        }
    };

    let dir = &config.output_dir;
    create_dir(dir)?;
    let ck_path = dir.join("model.modf");
    checkpoint.save(&ck_path)?;
    let mut codebooks = Vec::with_capacity(books.len());
    for (i, b) in books.iter().enumerate() {
        let p = dir.join(format!("codebook_{i}.modz"));
        CodebookFile::save(b, &p)?;
        codebooks.push(p);
    }
    let metrics = dir.join("metrics.csv");
    write_atomic(&metrics, report.to_csv().as_bytes())?;
    if let Some(r) = report.last() {
        writeln!(
            out,
            "step {} loss {} psnr_1x {} psnr_2x {}",
            r.step,
            fmt_metric(r.loss),
            fmt_metric(r.psnr_1x),
            fmt_metric(r.psnr_2x)
        )
        .map_err(io_err)?;
    }
    Ok(FitOutput {
        checkpoint: ck_path,
        codebooks,
        metrics,
        report,
    })
}

fn checkpoint(
    params: ModelParams<f32>,
    encoder: Option<crate::training::TileEncoder<f32>>,
    grid: &TileGrid,
    train: &TrainConfig,
) -> Checkpoint {
    Checkpoint {
        params,
        encoder,
        grid: Some(grid.clone()),
        seed: train.seed,
        step: train.steps as u64,
    }
}

/// The checkpoint's tiling applied to `extent`.
fn grid_for(ck: &Checkpoint, extent: &[usize]) -> Result<TileGrid> {
    let c = ck.params.config();
    if extent.len() != c.input_dim {
        return Err(Error::dims("signal dimension vs checkpoint", c.input_dim, extent.len()));
    }
    match &ck.grid {
        Some(g) if g.extent() == extent => Ok(g.clone()),
        Some(g) => TileGrid::new(extent.to_vec(), g.tile_size().to_vec(), g.overlap().to_vec()),
        None => Err(Error::config("checkpoint has no tiling")),
    }
}

/// Fits a codebook for `signal` with the checkpoint's network frozen and
/// writes it to `out_path`. Returns `(psnr_1x, psnr_2x)`.
pub fn cmd_infer(
    checkpoint: &Path,
    signal: &SampledSignal,
    train: &TrainConfig,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<(f64, f64)> {
    train.validate()?;
    let ck = Checkpoint::load(checkpoint)?;
    let c = ck.params.config();
    if signal.m != c.output_dim {
        return Err(Error::dims("signal channels vs checkpoint", c.output_dim, signal.m));
    }
    let grid = grid_for(&ck, &signal.extent)?;
    let book = infer_latents(&ck.params, signal, &grid, train)?;
    CodebookFile::save(&book, out_path)?;
    let (p1, p2) = evaluate_psnr(&ck.params, &book, signal)?;
    writeln!(out, "psnr_1x {} psnr_2x {}", fmt_metric(p1), fmt_metric(p2)).map_err(io_err)?;
    Ok((p1, p2))
}

fn check_codebook(params: &ModelParams<f32>, book: &Codebook<f32>) -> Result<()> {
    let c = params.config();
    if book.latent_dim() != c.latent_dim {
        return Err(Error::dims(
            "codebook latent size vs checkpoint",
            c.latent_dim,
            book.latent_dim(),
        ));
    }
    if book.grid().dim() != c.input_dim {
        return Err(Error::dims(
            "codebook dimension vs checkpoint",
            c.input_dim,
            book.grid().dim(),
        ));
    }
    Ok(())
}

/// Renders a 2-d field on the `factor`-times finer pixel grid and saves it
/// as PPM/PGM or PFM depending on the extension of `out_path`.
pub fn cmd_decode(checkpoint: &Path, codebook: &Path, factor: usize, out_path: &Path) -> Result<SampledSignal> {
    if factor == 0 {
        return Err(Error::config("factor must be >= 1"));
    }
    let ck = Checkpoint::load(checkpoint)?;
    let book = CodebookFile::load(codebook)?;
    check_codebook(&ck.params, &book)?;
    if book.grid().dim() != 2 {
        return Err(Error::config(
            "decode writes images and needs a 2-d field; evaluate 3-d fields with `eval --metric sdf-grid`",
        ));
    }
    let image = decode_dense(&ck.params, &book, factor)?;
    save_image(&image, out_path)?;
    Ok(image)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Psnr,
    L1,
    Chamfer,
    SdfGrid,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psnr" => Ok(Metric::Psnr),
            "l1" => Ok(Metric::L1),
            "chamfer" => Ok(Metric::Chamfer),
            "sdf-grid" => Ok(Metric::SdfGrid),
            _ => Err(Error::config(format!(
                "unknown metric {s:?}; expected psnr, l1, chamfer or sdf-grid"
            ))),
        }
    }
}

/// Evaluates `pred` against `target` and returns a two-line CSV.
///
/// | metric     | pred        | target       | columns                                  |
/// |------------|-------------|--------------|------------------------------------------|
/// | `psnr`     | image       | image        | `metric,psnr`                            |
/// | `l1`       | image       | image        | `metric,l1` (mean absolute difference)   |
/// | `chamfer`  | point file  | point file   | `metric,chamfer`                         |
/// | `sdf-grid` | checkpoint  | codebook     | `metric,mean_abs_error,sign_agreement`   |
///
/// For `sdf-grid`, `[-1, 1]^3` maps onto the codebook's grid and the field is
/// compared with `scene` at `resolution^3` cell centers.
pub fn cmd_eval(pred: &Path, target: &Path, metric: Metric, scene: &SdfShape, resolution: usize) -> Result<String> {
    match metric {
        Metric::Psnr | Metric::L1 => {
            let a = load_image(pred)?;
            let b = load_image(target)?;
            if a.extent != b.extent || a.m != b.m {
                return Err(Error::config(format!(
                    "image shapes differ: {:?}x{} vs {:?}x{}",
                    a.extent, a.m, b.extent, b.m
                )));
            }
            if metric == Metric::Psnr {
                Ok(format!(
                    "metric,psnr\npsnr,{}\n",
                    fmt_metric(psnr(&a.values, &b.values, 1.0)?)
                ))
            } else {
                let l1 =
                    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.values.len() as f64;
                Ok(format!("metric,l1\nl1,{}\n", fmt_metric(l1)))
            }
        }
        Metric::Chamfer => {
            let a = load_points(pred)?;
            let b = load_points(target)?;
            Ok(format!(
                "metric,chamfer\nchamfer,{}\n",
                fmt_metric(chamfer_distance(&a, &b, 3)?)
            ))
        }
        Metric::SdfGrid => {
            let ck = Checkpoint::load(pred)?;
            let book = CodebookFile::load(target)?;
            check_codebook(&ck.params, &book)?;
            let (err, sign) = sdf_metrics(&ck.params, &book, scene, resolution)?;
            Ok(format!(
                "metric,mean_abs_error,sign_agreement\nsdf-grid,{},{}\n",
                fmt_metric(err),
                fmt_metric(sign)
            ))
        }
    }
}

/// Grid metrics of a field fitted on `[-1, 1]^3` mapped onto a cubic grid.
pub fn sdf_metrics(
    params: &ModelParams<f32>,
    book: &Codebook<f32>,
    scene: &SdfShape,
    resolution: usize,
) -> Result<(f64, f64)> {
    let extent = book.grid().extent();
    if extent.len() != 3 || extent.iter().any(|&e| e != extent[0]) || params.config().output_dim != 1 {
        return Err(Error::config("sdf metrics need a scalar field on a cubic 3-d grid"));
    }
    let side = extent[0];
    sdf_grid_metrics(
        |pts| blended_decode_many(params, book, &world_to_grid(pts, side)),
        scene,
        resolution,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Modulated network with ReLU synthesis layers.
    Relu,
    /// Fourier-feature ReLU network with the latent concatenated to the input.
    Ffn,
    /// Sine network with the latent concatenated to the input.
    Concat,
    /// Modulated sine network.
    Modulated,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Relu => "relu",
            Baseline::Ffn => "ffn",
            Baseline::Concat => "concat",
            Baseline::Modulated => "modulated",
        }
    }

    /// `base` with the variant's conditioning, activation and encoding.
    pub fn settings(self, base: &ModelSettings, ffn: &FfnSettings) -> ModelSettings {
        let (conditioning, activation, input_encoding) = match self {
            Baseline::Relu => (Conditioning::Modulated, SynthActivation::Relu, InputEncoding::Raw),
            Baseline::Ffn => (
                Conditioning::Concat,
                SynthActivation::Relu,
                InputEncoding::FourierFeatures {
                    sigma: ffn.sigma,
                    feature_count: ffn.features,
                },
            ),
            Baseline::Concat => (Conditioning::Concat, SynthActivation::Sine, InputEncoding::Raw),
            Baseline::Modulated => (Conditioning::Modulated, SynthActivation::Sine, InputEncoding::Raw),
        };
        ModelSettings {
            conditioning,
            activation,
            input_encoding,
            ..*base
        }
    }

    /// Comma-separated names, e.g. `relu,modulated`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let list: Vec<Self> = s.split(',').map(|t| t.trim().parse()).collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(Error::Empty("baseline list"));
        }
        Ok(list)
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Baseline::Relu),
            "ffn" => Ok(Baseline::Ffn),
            "concat" => Ok(Baseline::Concat),
            "modulated" => Ok(Baseline::Modulated),
            _ => Err(Error::config(format!(
                "unknown baseline {s:?}; expected relu, ffn, concat or modulated"
            ))),
        }
    }
}

pub const COMPARE_HEADER: &str = "method,local,steps,psnr_1x,psnr_2x,psnr_hf,wall_ms";

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: Baseline,
    pub steps: usize,
    pub psnr_1x: f64,
    pub psnr_2x: f64,
    /// PSNR over the high-frequency half of dense 2-d signals; NaN otherwise.
    pub psnr_hf: f64,
    pub wall_ms: u64,
}

impl CompareRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},true,{},{},{},{},{}",
            self.method.name(),
            self.steps,
            fmt_metric(self.psnr_1x),
            fmt_metric(self.psnr_2x),
            fmt_metric(self.psnr_hf),
            self.wall_ms
        )
    }
}

/// Trains every requested variant with the same data, tiling, step budget
/// and seed. Writes `compare.csv` into the output directory and returns the
/// rows in request order.
pub fn cmd_compare(config: &ExperimentConfig, baselines: &[Baseline], out: &mut dyn Write) -> Result<Vec<CompareRow>> {
    config.validate()?;
    if baselines.is_empty() {
        return Err(Error::Empty("baseline list"));
    }
    let signals = config.load_data()?;
    let mut rows = Vec::with_capacity(baselines.len());
    let mut csv = String::from(COMPARE_HEADER);
    csv.push('\n');
    writeln!(out, "{COMPARE_HEADER}").map_err(io_err)?;
    for &b in baselines {
        let variant = ExperimentConfig {
            model: b.settings(&config.model, &config.ffn),
            ..config.clone()
        };
        let (grid, model) = variant.resolve(&signals)?;
        let start = Instant::now();
        let (params, books, report) = train_autodecoder(&signals, &grid, &model, &config.train)?;
        let wall_ms = if config.train.deterministic {
            0
        } else {
            start.elapsed().as_millis() as u64
        };
        let last = report.last().ok_or(Error::Empty("training report"))?;
        let hf: Vec<f64> = signals
            .iter()
            .zip(&books)
            .map(|(s, book)| {
                if s.dense && s.n == 2 {
                    let dec = decode_dense(&params, book, 1)?;
                    psnr_high_frequency_half(&dec.values, &s.values, s.extent[0], s.extent[1], s.m)
                } else {
                    Ok(f64::NAN)
                }
            })
            .collect::<Result<_>>()?;
        let row = CompareRow {
            method: b,
            steps: report.losses.len(),
            psnr_1x: last.psnr_1x,
            psnr_2x: last.psnr_2x,
            psnr_hf: hf.iter().sum::<f64>() / hf.len() as f64,
            wall_ms,
        };
        writeln!(out, "{}", row.to_csv()).map_err(io_err)?;
        csv.push_str(&row.to_csv());
        csv.push('\n');
        rows.push(row);
    }
    create_dir(&config.output_dir)?;
    write_atomic(&config.output_dir.join("compare.csv"), csv.as_bytes())?;
    Ok(rows)
}
