//! Binary checkpoint and codebook files, plus atomic writes.
//!
//! Both formats share one layout:
//!
//! ```text
//! magic      4 bytes   "MODF" (checkpoint) or "MODZ" (codebook)
//! version    u32 LE    currently 1
//! header_len u64 LE    byte length of the JSON header
//! header     UTF-8 JSON
//! blob       f32 LE    parameters or codes
//! ```
//!
//! Checkpoint blob order: each synthesis layer (row-major weights, then
//! bias), each modulator layer, the output layer, the Fourier matrix if the
//! model uses one, then each encoder layer if present. The header lists
//! every tensor with its shape; their sizes must sum to the blob length.
//! Codebook blobs hold the codes row-major over tile indices.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::nn::{Activation, DenseLayer};
use crate::tiling::{Codebook, TileGrid};
use crate::training::{EncoderConfig, TileEncoder};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MODF";
pub const CODEBOOK_MAGIC: &[u8; 4] = b"MODZ";
pub const FORMAT_VERSION: u32 = 1;

/// Writes `bytes` to a sibling temp file, syncs it and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn encode_container<H: Serialize>(magic: &[u8; 4], header: &H, blob: &[f32]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| Error::format("header", e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + blob.len() * 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in blob {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn decode_container<H: for<'de> Deserialize<'de>>(
    what: &'static str,
    magic: &[u8; 4],
    bytes: &[u8],
) -> Result<(H, Vec<f32>)> {
    if bytes.len() < 16 || &bytes[..4] != magic {
        return Err(Error::format(
            what,
            format!("missing {} magic", String::from_utf8_lossy(magic)),
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::format(what, format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let end = usize::try_from(len)
        .ok()
        .and_then(|l| l.checked_add(16))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::format(what, "header runs past end of file"))?;
    let header: H = serde_json::from_slice(&bytes[16..end]).map_err(|e| Error::format(what, e.to_string()))?;
    let body = &bytes[end..];
    if !body.len().is_multiple_of(4) {
        return Err(Error::format(what, "blob length is not a multiple of 4"));
    }
    let blob = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((header, blob))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    model: ModelConfig,
    encoder: Option<EncoderConfig>,
    grid: Option<TileGrid>,
    seed: u64,
    step: u64,
    tensors: Vec<TensorInfo>,
}

/// Trained network, optional encoder, and the run that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub encoder: Option<TileEncoder<f32>>,
    /// Tiling the network was trained on.
    pub grid: Option<TileGrid>,
    pub seed: u64,
    pub step: u64,
}

fn layer_tensors(prefix: &str, l: &DenseLayer<f32>, out: &mut Vec<TensorInfo>) {
    out.push(TensorInfo {
        name: format!("{prefix}.weight"),
        shape: vec![l.out_dim(), l.in_dim()],
    });
    out.push(TensorInfo {
        name: format!("{prefix}.bias"),
        shape: vec![l.out_dim()],
    });
}

struct BlobReader<'a> {
    blob: &'a [f32],
    tensors: std::slice::Iter<'a, TensorInfo>,
    offset: usize,
}

impl BlobReader<'_> {
    fn take(&mut self, name: &str, shape: &[usize]) -> Result<Vec<f32>> {
        let t = self
            .tensors
            .next()
            .ok_or_else(|| Error::format("checkpoint", format!("missing tensor {name}")))?;
        if t.name != name || t.shape != shape {
            return Err(Error::format(
                "checkpoint",
                format!("expected tensor {name} {shape:?}, found {} {:?}", t.name, t.shape),
            ));
        }
        let len: usize = shape.iter().product();
        let end = self.offset + len;
        if end > self.blob.len() {
            return Err(Error::format("checkpoint", format!("blob ends inside tensor {name}")));
        }
        let v = self.blob[self.offset..end].to_vec();
        self.offset = end;
        Ok(v)
    }

    fn layer(&mut self, prefix: &str, out_dim: usize, in_dim: usize, act: Activation) -> Result<DenseLayer<f32>> {
        let w = self.take(&format!("{prefix}.weight"), &[out_dim, in_dim])?;
        let b = self.take(&format!("{prefix}.bias"), &[out_dim])?;
        DenseLayer::from_parts(w, b, in_dim, act)
    }
}

impl Checkpoint {
    fn header(&self) -> CheckpointHeader {
        let p = &self.params;
        let mut tensors = Vec::new();
        for (i, l) in p.synth_layers().iter().enumerate() {
            layer_tensors(&format!("synth.{i}"), l, &mut tensors);
        }
        for (i, l) in p.modulator_layers().iter().enumerate() {
            layer_tensors(&format!("modulator.{i}"), l, &mut tensors);
        }
        layer_tensors("output", p.output_layer(), &mut tensors);
        if let Some(b) = p.fourier_matrix() {
            tensors.push(TensorInfo {
                name: "fourier".into(),
                shape: vec![b.len() / p.config().input_dim, p.config().input_dim],
            });
        }
        if let Some(e) = &self.encoder {
            for (i, l) in e.layers().iter().enumerate() {
                layer_tensors(&format!("encoder.{i}"), l, &mut tensors);
            }
        }
        CheckpointHeader {
            model: *p.config(),
            encoder: self.encoder.as_ref().map(|e| *e.config()),
            grid: self.grid.clone(),
            seed: self.seed,
            step: self.step,
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut blob = self.params.flatten();
        if let Some(b) = self.params.fourier_matrix() {
            blob.extend_from_slice(b);
        }
        if let Some(e) = &self.encoder {
            blob.extend(e.flatten());
        }
        encode_container(CHECKPOINT_MAGIC, &self.header(), &blob)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, blob): (CheckpointHeader, Vec<f32>) = decode_container("checkpoint", CHECKPOINT_MAGIC, bytes)?;
        let declared: usize = h.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
        if declared != blob.len() {
            return Err(Error::format(
                "checkpoint",
                format!("header declares {declared} values, blob holds {}", blob.len()),
            ));
        }
        let c = h.model;
        c.validate()?;
        let mut r = BlobReader {
            blob: &blob,
            tensors: h.tensors.iter(),
            offset: 0,
        };
        let act: Activation = c.activation.into();
        let mut synth = Vec::with_capacity(c.hidden_layers);
        for i in 0..c.hidden_layers {
            let din = if i == 0 { c.synth_input_dim() } else { c.width };
            synth.push(r.layer(&format!("synth.{i}"), c.width, din, act)?);
        }
        let mut modulator = Vec::new();
        if c.is_modulated() {
            for i in 0..=c.hidden_layers {
                let din = if i == 0 { c.latent_dim } else { c.width + c.latent_dim };
                modulator.push(r.layer(&format!("modulator.{i}"), c.width, din, Activation::Relu)?);
            }
        }
        let output = r.layer("output", c.output_dim, c.width, Activation::Identity)?;
        let fourier = match c.input_encoding {
            crate::model::InputEncoding::Raw => None,
            crate::model::InputEncoding::FourierFeatures { feature_count, .. } => {
                Some(r.take("fourier", &[feature_count, c.input_dim])?)
            }
        };
        let params = ModelParams::from_layers(c, synth, modulator, output, fourier)?;
        let encoder = match h.encoder {
            Some(ec) => {
                ec.validate()?;
                let dims = [
                    (ec.hidden, ec.input_dim, Activation::Relu),
                    (ec.hidden, ec.hidden, Activation::Relu),
                    (ec.latent_dim, ec.hidden, Activation::Identity),
                ];
                let layers = dims
                    .iter()
                    .enumerate()
                    .map(|(i, &(o, n, a))| r.layer(&format!("encoder.{i}"), o, n, a))
                    .collect::<Result<Vec<_>>>()?;
                Some(TileEncoder::from_layers(ec, layers)?)
            }
            None => None,
        };
        if r.tensors.next().is_some() {
            return Err(Error::format("checkpoint", "unexpected extra tensors"));
        }
        let grid = h.grid.map(TileGrid::rebuild).transpose()?;
        Ok(Self {
            params,
            encoder,
            grid,
            seed: h.seed,
            step: h.step,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookHeader {
    n: usize,
    latent_dim: usize,
    extent: Vec<usize>,
    tile_size: Vec<usize>,
    overlap: Vec<usize>,
    tile_count: usize,
}

/// File form of a [`Codebook`].
pub struct CodebookFile;

impl CodebookFile {
    pub fn to_bytes(book: &Codebook<f32>) -> Result<Vec<u8>> {
        let g = book.grid();
        let header = CodebookHeader {
            n: g.dim(),
            latent_dim: book.latent_dim(),
            extent: g.extent().to_vec(),
            tile_size: g.tile_size().to_vec(),
            overlap: g.overlap().to_vec(),
            tile_count: g.tile_count(),
        };
        encode_container(CODEBOOK_MAGIC, &header, book.codes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Codebook<f32>> {
        let (h, blob): (CodebookHeader, Vec<f32>) = decode_container("codebook", CODEBOOK_MAGIC, bytes)?;
        let grid = TileGrid::new(h.extent, h.tile_size, h.overlap)?;
        ensure_len("codebook dimension", h.n, grid.dim())?;
        ensure_len("codebook tile count", h.tile_count, grid.tile_count())?;
        if blob.len() != h.tile_count * h.latent_dim {
            return Err(Error::format(
                "codebook",
                format!(
                    "{} tiles x {} need {} values, blob holds {}",
                    h.tile_count,
                    h.latent_dim,
                    h.tile_count * h.latent_dim,
                    blob.len()
                ),
            ));
        }
        Codebook::from_codes(grid, h.latent_dim, blob)
    }

    pub fn save(book: &Codebook<f32>, path: &Path) -> Result<()> {
        write_atomic(path, &Self::to_bytes(book)?)
    }

    pub fn load(path: &Path) -> Result<Codebook<f32>> {
        Self::from_bytes(&read_file(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Conditioning, InputEncoding, SynthActivation};
    use crate::nn::RngStream;

    fn checkpoint(cfg: ModelConfig, with_encoder: bool) -> Checkpoint {
        let mut rng = RngStream::new(3);
        let params = ModelParams::init(cfg, &mut rng).unwrap();
        let encoder = with_encoder.then(|| {
            TileEncoder::init(
                EncoderConfig {
                    input_dim: 16,
                    hidden: 5,
                    latent_dim: cfg.latent_dim,
                },
                &mut rng,
            )
            .unwrap()
        });
        Checkpoint {
            params,
            encoder,
            grid: Some(TileGrid::uniform(vec![64, 64], 32, 8).unwrap()),
            seed: 42,
            step: 1234,
        }
    }

    fn configs() -> Vec<ModelConfig> {
        let base = ModelConfig {
            latent_dim: 6,
            hidden_layers: 2,
            width: 5,
            ..ModelConfig::new(2, 3)
        };
        vec![
            base,
            ModelConfig {
                conditioning: Conditioning::Concat,
                ..base
            },
            ModelConfig {
                conditioning: Conditioning::Concat,
                activation: SynthActivation::Relu,
                input_encoding: InputEncoding::FourierFeatures {
                    sigma: 3.0,
                    feature_count: 4,
                },
                ..base
            },
            ModelConfig {
                conditioning: Conditioning::None,
                ..base
            },
        ]
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        for cfg in configs() {
            for enc in [false, true] {
                let ck = checkpoint(cfg, enc);
                let bytes = ck.to_bytes().unwrap();
                assert_eq!(&bytes[..4], b"MODF");
                let back = Checkpoint::from_bytes(&bytes).unwrap();
                assert_eq!(back, ck);
                assert_eq!(back.to_bytes().unwrap(), bytes);
            }
        }
    }

    #[test]
    fn checkpoint_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.modf");
        let ck = checkpoint(configs()[0], true);
        ck.save(&path).unwrap();
        let first = std::fs::read(&path).unwrap();
        Checkpoint::load(&path).unwrap().save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        // No temp files left behind.
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let bytes = checkpoint(configs()[0], false).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        let mut extra = bytes.clone();
        extra.extend_from_slice(&[0; 4]);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(Checkpoint::from_bytes(&version)
            .unwrap_err()
            .to_string()
            .contains("version"));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(Checkpoint::from_bytes(&magic).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
        let mut header_len = bytes;
        header_len[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(Checkpoint::from_bytes(&header_len).is_err());
    }

    #[test]
    fn codebook_round_trip() {
        let grid = TileGrid::uniform(vec![56, 80], 32, 8).unwrap();
        let book: Codebook<f32> = Codebook::random(grid, 7, 0.1, &mut RngStream::new(1));
        let bytes = CodebookFile::to_bytes(&book).unwrap();
        assert_eq!(&bytes[..4], b"MODZ");
        let back = CodebookFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, book);
        assert_eq!(CodebookFile::to_bytes(&back).unwrap(), bytes);
        assert!(CodebookFile::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
