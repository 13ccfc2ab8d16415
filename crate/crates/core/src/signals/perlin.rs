//! Frequency-sweep grids of 2-d gradient noise.
//!
//! Noise variant: lattice gradient noise with the four diagonal gradients
//! `(±1, ±1)`, quintic fade `6t^5 - 15t^4 + 10t^3`, and a 256-entry
//! permutation shuffled by Fisher-Yates from the seed's [`RngStream`]. The
//! gradient at lattice point `(i, j)` is selected by
//! `perm[(perm[i & 255] + j) & 255] & 3`. Raw values lie in `[-1, 1]` and are
//! zero on lattice points; grid outputs are mapped to `(v + 1) / 2`.

use serde::{Deserialize, Serialize};

use super::SampledSignal;
use crate::error::{Error, Result};
use crate::nn::RngStream;

#[derive(Debug, Clone)]
pub struct Permutation([u8; 256]);

impl Permutation {
    pub fn new(seed: u64) -> Self {
        let mut p = [0u8; 256];
        for (i, v) in p.iter_mut().enumerate() {
            *v = i as u8;
        }
        let mut rng = RngStream::new(seed);
        for i in (1..256).rev() {
            let j = rng.index(i + 1);
            p.swap(i, j);
        }
        Self(p)
    }

    fn hash(&self, i: i64, j: i64) -> u8 {
        let a = self.0[(i & 255) as usize] as i64;
        self.0[((a + j) & 255) as usize]
    }
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn corner(h: u8, dx: f64, dy: f64) -> f64 {
    match h & 3 {
        0 => dx + dy,
        1 => -dx + dy,
        2 => dx - dy,
        _ => -dx - dy,
    }
}

/// Raw noise in `[-1, 1]`.
pub fn perlin_noise(perm: &Permutation, x: f64, y: f64) -> f64 {
    let (xf, yf) = (x.floor(), y.floor());
    let (i, j) = (xf as i64, yf as i64);
    let (dx, dy) = (x - xf, y - yf);
    let n00 = corner(perm.hash(i, j), dx, dy);
    let n10 = corner(perm.hash(i + 1, j), dx - 1.0, dy);
    let n01 = corner(perm.hash(i, j + 1), dx, dy - 1.0);
    let n11 = corner(perm.hash(i + 1, j + 1), dx - 1.0, dy - 1.0);
    let (u, v) = (fade(dx), fade(dy));
    let a = n00 + u * (n10 - n00);
    let b = n01 + u * (n11 - n01);
    // Diagonal gradients give |value| <= 1 after interpolation.
    (a + v * (b - a)).clamp(-1.0, 1.0)
}

/// `rows x cols` patches of `patch` pixels. Patch `(r, c)` oscillates with
/// `freqs_x[c]` cycles per patch horizontally and `freqs_y[r]` vertically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerlinSpec {
    pub rows: usize,
    pub cols: usize,
    pub patch: usize,
    pub freqs_x: Vec<f64>,
    pub freqs_y: Vec<f64>,
    pub seed: u64,
}

impl PerlinSpec {
    /// Square grid with frequencies sweeping geometrically from `lo` to `hi`.
    pub fn sweep(size: usize, patch: usize, lo: f64, hi: f64, seed: u64) -> Self {
        let freqs: Vec<f64> = (0..size)
            .map(|i| {
                if size == 1 {
                    lo
                } else {
                    lo * (hi / lo).powf(i as f64 / (size - 1) as f64)
                }
            })
            .collect();
        Self {
            rows: size,
            cols: size,
            patch,
            freqs_x: freqs.clone(),
            freqs_y: freqs,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.patch == 0 {
            return Err(Error::config("perlin grid needs positive rows, cols and patch size"));
        }
        if self.freqs_x.len() != self.cols || self.freqs_y.len() != self.rows {
            return Err(Error::config("perlin grid needs one frequency per column and per row"));
        }
        for f in [&self.freqs_x, &self.freqs_y] {
            if f.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::config("perlin frequencies must be positive"));
            }
            if f.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("perlin frequencies must increase"));
            }
        }
        Ok(())
    }

    pub fn extent(&self) -> [usize; 2] {
        [self.cols * self.patch, self.rows * self.patch]
    }
}

/// One-channel dense image in `[0, 1]`.
pub fn perlin_grid(spec: &PerlinSpec) -> Result<SampledSignal> {
    spec.validate()?;
    let perm = Permutation::new(spec.seed);
    let [w, h] = spec.extent();
    let p = spec.patch as f64;
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        let (r, ly) = (y / spec.patch, (y % spec.patch) as f64 + 0.5);
        for x in 0..w {
            let (c, lx) = (x / spec.patch, (x % spec.patch) as f64 + 0.5);
            // Each patch reads a disjoint region of the noise plane.
            let ox = (c * 64) as f64;
            let oy = (r * 64) as f64;
            let v = perlin_noise(&perm, ox + lx * spec.freqs_x[c] / p, oy + ly * spec.freqs_y[r] / p);
            values.push((v + 1.0) * 0.5);
        }
    }
    SampledSignal::dense(vec![w, h], 1, values)
}
