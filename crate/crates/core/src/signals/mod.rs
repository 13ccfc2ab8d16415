//! Signal containers, image I/O, resampling, procedural textures, analytic
//! SDF scenes, point samplers and distance metrics.

mod chamfer;
mod image;
mod perlin;
mod sdf;

pub use chamfer::{chamfer_distance, chamfer_distance_brute, KdTree};
pub use image::{load_image, save_image, ImageFormat};
pub use perlin::{perlin_grid, perlin_noise, PerlinSpec, Permutation};
pub use sdf::{
    decode_points, encode_points, load_points, sample_sdf_points, save_points, sdf_eval, sdf_grid_metrics,
    sdf_samples_on_grid, uniform_in_unit_sphere, world_to_grid, SdfShape,
};

use crate::error::{ensure_len, Error, Result};

/// Samples of a field `R^n -> R^m` in global sample coordinates.
///
/// Dense signals hold one sample per pixel center, `coords[k] = index + 0.5`,
/// with axis 0 varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub n: usize,
    pub m: usize,
    pub extent: Vec<usize>,
    /// Row-major `len x n`.
    pub coords: Vec<f64>,
    /// Row-major `len x m`.
    pub values: Vec<f64>,
    pub dense: bool,
}

impl SampledSignal {
    /// Dense signal on the pixel-center grid of `extent`.
    pub fn dense(extent: Vec<usize>, m: usize, values: Vec<f64>) -> Result<Self> {
        let count: usize = extent.iter().product();
        ensure_len("dense signal values", count * m, values.len())?;
        if m == 0 || count == 0 {
            return Err(Error::Empty("signal"));
        }
        let coords = pixel_center_grid(&extent, 1)?;
        Ok(Self {
            n: extent.len(),
            m,
            extent,
            coords,
            values,
            dense: true,
        })
    }

    /// Scattered samples inside `extent`.
    pub fn scattered(extent: Vec<usize>, m: usize, coords: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = extent.len();
        if n == 0 || m == 0 {
            return Err(Error::config("signal needs n >= 1 and m >= 1"));
        }
        if !coords.len().is_multiple_of(n) {
            return Err(Error::dims("scattered coordinates", coords.len() / n * n, coords.len()));
        }
        ensure_len("scattered values", coords.len() / n * m, values.len())?;
        Ok(Self {
            n,
            m,
            extent,
            coords,
            values,
            dense: false,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    /// Dense 2-d sample at pixel `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        self.value(y * self.extent[0] + x)
    }

    /// Dense sub-block `[x0, x0 + w) x [y0, y0 + h)` as a new dense signal.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        self.require_dense_2d("crop")?;
        if x0 + w > self.extent[0] || y0 + h > self.extent[1] {
            return Err(Error::config(format!(
                "crop {w}x{h} at ({x0}, {y0}) exceeds {:?}",
                self.extent
            )));
        }
        let mut values = Vec::with_capacity(w * h * self.m);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                values.extend_from_slice(self.pixel(x, y));
            }
        }
        Self::dense(vec![w, h], self.m, values)
    }

    fn require_dense_2d(&self, what: &str) -> Result<()> {
        if !self.dense || self.n != 2 {
            return Err(Error::config(format!("{what} needs a dense 2-d signal")));
        }
        Ok(())
    }
}

/// Pixel centers of a `factor`-times finer grid, in the original frame:
/// index `k` maps to `(k + 0.5) / factor` on each axis. Axis 0 varies fastest.
pub fn pixel_center_grid(extent: &[usize], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 {
        return Err(Error::config("resolution factor must be >= 1"));
    }
    let n = extent.len();
    let fine: Vec<usize> = extent.iter().map(|e| e * factor).collect();
    let count: usize = fine.iter().product();
    let mut out = Vec::with_capacity(count * n);
    let mut idx = vec![0usize; n];
    for _ in 0..count {
        out.extend(idx.iter().map(|&k| (k as f64 + 0.5) / factor as f64));
        for (a, i) in idx.iter_mut().enumerate() {
            *i += 1;
            if *i < fine[a] {
                break;
            }
            *i = 0;
        }
    }
    Ok(out)
}

/// Bilinear interpolation of a dense 2-d signal at the pixel centers of
/// `new_extent`. Samples beyond the outermost source centers are clamped.
pub fn bilinear_resample(signal: &SampledSignal, new_extent: [usize; 2]) -> Result<SampledSignal> {
    signal.require_dense_2d("bilinear resampling")?;
    let [nw, nh] = new_extent;
    if nw == 0 || nh == 0 {
        return Err(Error::Empty("resample target"));
    }
    let (w, h, m) = (signal.extent[0], signal.extent[1], signal.m);
    let axis = |k: usize, src: usize, dst: usize| {
        let u = (k as f64 + 0.5) * src as f64 / dst as f64 - 0.5;
        let u = u.clamp(0.0, (src - 1) as f64);
        let i0 = (u.floor() as usize).min(src - 1);
        let i1 = (i0 + 1).min(src - 1);
        (i0, i1, u - i0 as f64)
    };
    let mut values = Vec::with_capacity(nw * nh * m);
    for y in 0..nh {
        let (y0, y1, fy) = axis(y, h, nh);
        for x in 0..nw {
            let (x0, x1, fx) = axis(x, w, nw);
            for c in 0..m {
                let v00 = signal.pixel(x0, y0)[c];
                let v10 = signal.pixel(x1, y0)[c];
                let v01 = signal.pixel(x0, y1)[c];
                let v11 = signal.pixel(x1, y1)[c];
                let top = v00 + (v10 - v00) * fx;
                let bottom = v01 + (v11 - v01) * fx;
                values.push(top + (bottom - top) * fy);
            }
        }
    }
    SampledSignal::dense(vec![nw, nh], m, values)
}

/// One member of a family of smooth synthetic images: a random linear
/// color ramp plus six Gaussian blobs, clamped to `[0, 1]`.
pub fn smooth_blobs(width: usize, height: usize, m: usize, seed: u64) -> Result<SampledSignal> {
    if width == 0 || height == 0 || m == 0 {
        return Err(Error::Empty("image"));
    }
    let mut rng = crate::nn::RngStream::new(seed);
    let base: Vec<[f64; 3]> = (0..m)
        .map(|_| [rng.uniform(0.3, 0.7), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)])
        .collect();
    let scale = width.max(height) as f64;
    let blobs: Vec<(f64, f64, f64, Vec<f64>)> = (0..6)
        .map(|_| {
            let cx = rng.uniform(0.0, width as f64);
            let cy = rng.uniform(0.0, height as f64);
            let sigma = rng.uniform(scale / 10.0, scale / 4.0);
            let amp = (0..m).map(|_| rng.uniform(-0.35, 0.35)).collect();
            (cx, cy, sigma, amp)
        })
        .collect();
    let mut values = Vec::with_capacity(width * height * m);
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let (u, v) = (px / width as f64 - 0.5, py / height as f64 - 0.5);
            for (c, b) in base.iter().enumerate() {
                let mut val = b[0] + b[1] * u + b[2] * v;
                for (cx, cy, s, amp) in &blobs {
                    let r2 = (px - cx).powi(2) + (py - cy).powi(2);
                    val += amp[c] * (-r2 / (2.0 * s * s)).exp();
                }
                values.push(val.clamp(0.0, 1.0));
            }
        }
    }
    SampledSignal::dense(vec![width, height], m, values)
}
