//! Experiment configuration: a JSON file whose fields all have defaults,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Conditioning, InputEncoding, ModelConfig, SynthActivation};
use crate::nn::RngStream;
use crate::signals::{
    load_image, perlin_grid, sample_sdf_points, sdf_samples_on_grid, smooth_blobs, PerlinSpec, SampledSignal, SdfShape,
};
use crate::tiling::TileGrid;
use crate::training::{LossKind, TrainConfig};

/// Network settings; the coordinate and signal dimensions come from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub latent_dim: usize,
    pub hidden_layers: usize,
    pub width: usize,
    pub omega0: f64,
    pub conditioning: Conditioning,
    pub input_encoding: InputEncoding,
    pub activation: SynthActivation,
    pub modulator_bias: f64,
    pub hidden_init_omega: Option<f64>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self::from(ModelConfig::new(1, 1))
    }
}

impl From<ModelConfig> for ModelSettings {
    fn from(c: ModelConfig) -> Self {
        Self {
            latent_dim: c.latent_dim,
            hidden_layers: c.hidden_layers,
            width: c.width,
            omega0: c.omega0,
            conditioning: c.conditioning,
            input_encoding: c.input_encoding,
            activation: c.activation,
            modulator_bias: c.modulator_bias,
            hidden_init_omega: c.hidden_init_omega,
        }
    }
}

impl ModelSettings {
    pub fn to_config(&self, input_dim: usize, output_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            output_dim,
            latent_dim: self.latent_dim,
            hidden_layers: self.hidden_layers,
            width: self.width,
            omega0: self.omega0,
            conditioning: self.conditioning,
            input_encoding: self.input_encoding,
            activation: self.activation,
            modulator_bias: self.modulator_bias,
            hidden_init_omega: self.hidden_init_omega,
        }
    }
}

/// The same tile size and overlap on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TilingSettings {
    pub tile_size: usize,
    pub overlap: usize,
}

impl Default for TilingSettings {
    fn default() -> Self {
        Self {
            tile_size: 32,
            overlap: 8,
        }
    }
}

/// Fourier-feature settings for the `ffn` baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FfnSettings {
    pub sigma: f64,
    pub features: usize,
}

impl Default for FfnSettings {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            features: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Latent codes are free parameters optimized with the network.
    #[default]
    Autodecoder,
    /// Latent codes are predicted from tile samples by an encoder.
    Autoencoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerlinData {
    /// Patches per side.
    pub size: usize,
    pub patch: usize,
    pub freq_lo: f64,
    pub freq_hi: f64,
    pub seed: u64,
}

impl Default for PerlinData {
    fn default() -> Self {
        Self {
            size: 4,
            patch: 32,
            freq_lo: 2.0,
            freq_hi: 16.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobsData {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Image `i` uses seed `seed + i`.
    pub seed: u64,
}

impl Default for BlobsData {
    fn default() -> Self {
        Self {
            count: 4,
            width: 64,
            height: 64,
            channels: 3,
            seed: 0,
        }
    }
}

/// Point samples of an analytic scene. World space `[-1, 1]^3` is mapped
/// onto a cubic grid of side `extent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdfData {
    pub scene: SdfShape,
    pub points: usize,
    pub near_fraction: f64,
    pub near_sigma: f64,
    pub extent: usize,
    pub seed: u64,
}

impl Default for SdfData {
    fn default() -> Self {
        Self {
            scene: SdfShape::demo_scene(),
            points: 50_000,
            near_fraction: 0.5,
            near_sigma: 0.01,
            extent: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Image { path: PathBuf },
    Images { paths: Vec<PathBuf> },
    Perlin(PerlinData),
    Blobs(BlobsData),
    Sdf(SdfData),
}

impl DataSource {
    /// Signals in tile-grid coordinates. Relative image paths resolve
    /// against `base`.
    pub fn load(&self, base: &Path) -> Result<Vec<SampledSignal>> {
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        match self {
            DataSource::Image { path } => Ok(vec![load_image(&resolve(path))?]),
            DataSource::Images { paths } => {
                if paths.is_empty() {
                    return Err(Error::Empty("image list"));
                }
                paths.iter().map(|p| load_image(&resolve(p))).collect()
            }
            DataSource::Perlin(p) => {
                if p.size == 0 {
                    return Err(Error::config("perlin size must be >= 1"));
                }
                Ok(vec![perlin_grid(&PerlinSpec::sweep(
                    p.size, p.patch, p.freq_lo, p.freq_hi, p.seed,
                ))?])
            }
            DataSource::Blobs(b) => {
                if b.count == 0 {
                    return Err(Error::Empty("blob image count"));
                }
                (0..b.count as u64)
                    .map(|i| smooth_blobs(b.width, b.height, b.channels, b.seed + i))
                    .collect()
            }
            DataSource::Sdf(s) => {
                if s.extent == 0 || s.points == 0 {
                    return Err(Error::config("sdf data needs points >= 1 and extent >= 1"));
                }
                let world = sample_sdf_points(
                    &s.scene,
                    s.points,
                    s.near_fraction,
                    s.near_sigma,
                    &mut RngStream::new(s.seed),
                )?;
                Ok(vec![sdf_samples_on_grid(&world, s.extent)?])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSettings,
    pub tiling: TilingSettings,
    pub train: TrainConfig,
    pub data: Option<DataSource>,
    pub output_dir: PathBuf,
    pub mode: FitMode,
    /// Hidden width of the tile encoder in auto-encoder mode.
    pub encoder_hidden: usize,
    pub ffn: FfnSettings,
    /// Directory that relative data paths resolve against; the config
    /// file's directory when loaded from disk.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSettings::default(),
            tiling: TilingSettings::default(),
            train: TrainConfig::default(),
            data: None,
            output_dir: PathBuf::from("out"),
            mode: FitMode::default(),
            encoder_hidden: 256,
            ffn: FfnSettings::default(),
            base_dir: PathBuf::new(),
        }
    }
}

/// Flag values that replace config fields when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub deterministic: bool,
    pub steps: Option<usize>,
    pub tile_size: Option<usize>,
    pub overlap: Option<usize>,
    pub latent_dim: Option<usize>,
    pub width: Option<usize>,
    pub layers: Option<usize>,
    pub omega0: Option<f64>,
    pub loss: Option<LossKind>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_json(&text)?;
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.train.seed = v;
        }
        if o.deterministic {
            self.train.deterministic = true;
        }
        if let Some(v) = o.steps {
            self.train.steps = v;
        }
        if let Some(v) = o.tile_size {
            self.tiling.tile_size = v;
        }
        if let Some(v) = o.overlap {
            self.tiling.overlap = v;
        }
        if let Some(v) = o.latent_dim {
            self.model.latent_dim = v;
        }
        if let Some(v) = o.width {
            self.model.width = v;
        }
        if let Some(v) = o.layers {
            self.model.hidden_layers = v;
        }
        if let Some(v) = o.omega0 {
            self.model.omega0 = v;
        }
        if let Some(v) = o.loss {
            self.train.loss = v;
        }
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.model.to_config(1, 1).validate()?;
        if self.tiling.tile_size == 0 || self.tiling.overlap >= self.tiling.tile_size {
            return Err(Error::config(format!(
                "tile size {} must exceed overlap {}",
                self.tiling.tile_size, self.tiling.overlap
            )));
        }
        if self.mode == FitMode::Autoencoder && self.encoder_hidden == 0 {
            return Err(Error::config("encoder_hidden must be >= 1"));
        }
        Ok(())
    }

    pub fn load_data(&self) -> Result<Vec<SampledSignal>> {
        let data = self
            .data
            .as_ref()
            .ok_or_else(|| Error::config("no data source: pass an input file or set \"data\" in the config"))?;
        data.load(&self.base_dir)
    }

    /// Grid over the shared extent of `signals`, and the model config with
    /// dimensions taken from them.
    pub fn resolve(&self, signals: &[SampledSignal]) -> Result<(TileGrid, ModelConfig)> {
        let first = signals.first().ok_or(Error::Empty("signal set"))?;
        for s in signals {
            if s.extent != first.extent || s.m != first.m {
                return Err(Error::config("all signals must share extent and channel count"));
            }
        }
        let grid = TileGrid::uniform(first.extent.clone(), self.tiling.tile_size, self.tiling.overlap)?;
        let model = self.model.to_config(first.n, first.m);
        model.validate()?;
        Ok((grid, model))
    }

    /// The SDF scene when the data source is one.
    pub fn sdf_scene(&self) -> Option<&SdfShape> {
        match &self.data {
            Some(DataSource::Sdf(s)) => Some(&s.scene),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_defaults() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn nested_fields_parse() {
        let c = ExperimentConfig::from_json(
            r#"{
                "model": {"latent_dim": 8, "activation": "relu", "modulator_bias": 1.0},
                "tiling": {"tile_size": 16, "overlap": 4},
                "train": {"steps": 10, "loss": "l1"},
                "data": {"kind": "sdf", "points": 100, "extent": 32},
                "mode": "autoencoder"
            }"#,
        )
        .unwrap();
        assert_eq!(c.model.latent_dim, 8);
        assert_eq!(c.model.activation, SynthActivation::Relu);
        assert_eq!(c.model.width, 64);
        assert_eq!(c.tiling.tile_size, 16);
        assert_eq!(c.train.loss, LossKind::L1);
        assert_eq!(c.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(c.mode, FitMode::Autoencoder);
        match &c.data {
            Some(DataSource::Sdf(s)) => {
                assert_eq!((s.points, s.extent), (100, 32));
                assert_eq!(s.scene, SdfShape::demo_scene());
            }
            other => panic!("unexpected data {other:?}"),
        }
        let perlin = ExperimentConfig::from_json(r#"{"data": {"kind": "perlin", "patch": 16}}"#).unwrap();
        assert!(matches!(
            perlin.data,
            Some(DataSource::Perlin(PerlinData { patch: 16, size: 4, .. }))
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"modle": {}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"model": {"widht": 3}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"data": {"kind": "video"}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"data": {"kind": "blobs", "count": 2, "colour": 1}}"#).is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let mut c =
            ExperimentConfig::from_json(r#"{"train": {"steps": 10, "seed": 5}, "model": {"width": 16}}"#).unwrap();
        c.apply(&Overrides {
            steps: Some(20),
            width: Some(8),
            deterministic: true,
            ..Overrides::default()
        });
        assert_eq!(c.train.steps, 20);
        assert_eq!(c.train.seed, 5);
        assert_eq!(c.model.width, 8);
        assert!(c.train.deterministic);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = ExperimentConfig::default();
        c.tiling.overlap = 32;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.train.steps = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.model.width = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn data_sources_load_in_grid_coordinates() {
        let blobs = DataSource::Blobs(BlobsData {
            count: 2,
            width: 8,
            height: 4,
            channels: 1,
            seed: 3,
        })
        .load(Path::new("."))
        .unwrap();
        assert_eq!(blobs.len(), 2);
        assert_eq!(blobs[1], smooth_blobs(8, 4, 1, 4).unwrap());

        let sdf = DataSource::Sdf(SdfData {
            points: 200,
            extent: 16,
            ..SdfData::default()
        })
        .load(Path::new("."))
        .unwrap();
        assert_eq!(sdf[0].extent, vec![16, 16, 16]);
        assert!(sdf[0].coords.iter().all(|v| (0.0..=16.0).contains(v)));

        let c = ExperimentConfig {
            tiling: TilingSettings {
                tile_size: 4,
                overlap: 1,
            },
            ..ExperimentConfig::default()
        };
        let (grid, model) = c.resolve(&blobs).unwrap();
        assert_eq!(grid.extent(), &[8, 4]);
        assert_eq!((model.input_dim, model.output_dim), (2, 1));
        assert!(c.load_data().is_err());
    }
}
