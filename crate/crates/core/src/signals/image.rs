//! Binary PPM (P6), PGM (P5) and PFM images.
//!
//! PPM/PGM samples are 8-bit with maxval 255 and map to `v / 255`. PFM stores
//! 32-bit floats with rows from bottom to top; files are written
//! little-endian (scale `-1.0`), and both byte orders are read.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::SampledSignal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Ppm,
    Pfm,
}

impl ImageFormat {
    /// `.pfm` is float; `.ppm` and `.pgm` are 8-bit.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("ppm") | Some("pgm") => Ok(Self::Ppm),
            Some("pfm") => Ok(Self::Pfm),
            _ => Err(Error::format(
                "image",
                format!("unknown extension on {}", path.display()),
            )),
        }
    }
}

pub fn load_image(path: &Path) -> Result<SampledSignal> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Writes atomically. PPM output needs `m` of 1 (PGM) or 3; values are
/// clamped to `[0, 1]` and rounded.
pub fn save_image(signal: &SampledSignal, path: &Path) -> Result<()> {
    let bytes = encode_image(signal, ImageFormat::from_path(path)?)?;
    crate::format::write_atomic(path, &bytes)
}

pub fn encode_image(signal: &SampledSignal, format: ImageFormat) -> Result<Vec<u8>> {
    if !signal.dense || signal.n != 2 {
        return Err(Error::config("images must be dense 2-d signals"));
    }
    let (w, h, m) = (signal.extent[0], signal.extent[1], signal.m);
    let mut out = Vec::new();
    match format {
        ImageFormat::Ppm => {
            let magic = match m {
                1 => "P5",
                3 => "P6",
                _ => return Err(Error::config(format!("8-bit images need 1 or 3 channels, got {m}"))),
            };
            write!(out, "{magic}\n{w} {h}\n255\n").expect("write to vec");
            out.extend(signal.values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        }
        ImageFormat::Pfm => {
            let magic = match m {
                1 => "Pf",
                3 => "PF",
                _ => return Err(Error::config(format!("float images need 1 or 3 channels, got {m}"))),
            };
            write!(out, "{magic}\n{w} {h}\n-1.0\n").expect("write to vec");
            for y in (0..h).rev() {
                for x in 0..w {
                    for v in signal.pixel(x, y) {
                        out.extend_from_slice(&(*v as f32).to_le_bytes());
                    }
                }
            }
        }
    }
    Ok(out)
}

struct Header<'a> {
    tokens: Vec<&'a str>,
    body: usize,
}

/// Reads `count` whitespace-separated header tokens (with `#` comments) and
/// the single whitespace byte that ends the header.
fn read_header(bytes: &[u8], count: usize) -> Result<Header<'_>> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::format("image", "truncated header"));
        }
        let tok = std::str::from_utf8(&bytes[start..i]).map_err(|_| Error::format("image", "non-ASCII header"))?;
        tokens.push(tok);
    }
    if i >= bytes.len() {
        return Err(Error::format("image", "missing payload"));
    }
    Ok(Header { tokens, body: i + 1 })
}

fn parse_dim(tok: &str, what: &'static str) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::format("image", format!("bad {what} {tok:?}"))),
    }
}

pub fn decode_image(bytes: &[u8]) -> Result<SampledSignal> {
    let magic = bytes.get(..2).ok_or_else(|| Error::format("image", "empty file"))?;
    match magic {
        b"P6" | b"P5" => {
            let hdr = read_header(bytes, 4)?;
            let m = if magic == b"P6" { 3 } else { 1 };
            let w = parse_dim(hdr.tokens[1], "width")?;
            let h = parse_dim(hdr.tokens[2], "height")?;
            if hdr.tokens[3] != "255" {
                return Err(Error::format(
                    "image",
                    format!("maxval {} unsupported, need 255", hdr.tokens[3]),
                ));
            }
            let need = w * h * m;
            let payload = &bytes[hdr.body..];
            if payload.len() < need {
                return Err(Error::format(
                    "image",
                    format!("truncated payload: {} of {need} bytes", payload.len()),
                ));
            }
            let values = payload[..need].iter().map(|&b| f64::from(b) / 255.0).collect();
            SampledSignal::dense(vec![w, h], m, values)
        }
        b"PF" | b"Pf" => {
            let hdr = read_header(bytes, 4)?;
            let m = if magic == b"PF" { 3 } else { 1 };
            let w = parse_dim(hdr.tokens[1], "width")?;
            let h = parse_dim(hdr.tokens[2], "height")?;
            let scale: f64 = hdr.tokens[3]
                .parse()
                .map_err(|_| Error::format("image", format!("bad scale {:?}", hdr.tokens[3])))?;
            if scale == 0.0 || !scale.is_finite() {
                return Err(Error::format("image", "scale must be non-zero"));
            }
            let little = scale < 0.0;
            let need = w * h * m * 4;
            let payload = &bytes[hdr.body..];
            if payload.len() < need {
                return Err(Error::format(
                    "image",
                    format!("truncated payload: {} of {need} bytes", payload.len()),
                ));
            }
            let floats: Vec<f32> = payload[..need]
                .chunks_exact(4)
                .map(|c| {
                    let b = [c[0], c[1], c[2], c[3]];
                    if little {
                        f32::from_le_bytes(b)
                    } else {
                        f32::from_be_bytes(b)
                    }
                })
                .collect();
            let mut values = Vec::with_capacity(w * h * m);
            for y in (0..h).rev() {
                values.extend(floats[y * w * m..(y + 1) * w * m].iter().map(|&v| f64::from(v)));
            }
            SampledSignal::dense(vec![w, h], m, values)
        }
        _ => Err(Error::format("image", "unknown magic, expected P5, P6, Pf or PF")),
    }
}
