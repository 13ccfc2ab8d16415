//! Regular grids of overlapping tiles, local coordinates and n-linear blending.
//!
//! Along each axis tile `i` starts at `min(i * stride, extent - tile)` with
//! `stride = tile - overlap`, and covers the half-open footprint
//! `[origin, origin + tile)`. The last tile also owns the closed far edge of
//! the domain. Tile multi-indices are flattened row-major with axis 0 fastest.
//!
//! Blend weights: along one axis a tile's weight is a linear ramp across each
//! band it shares with a neighbour, rising from 0 at its own footprint edge to
//! 1 where the neighbour's footprint ends, and 1 where it is the only tile.
//! Within a band `[a, b)` shared by tiles `i` (left) and `i + 1`, this gives
//! `w_i = (b - p) / (b - a)` and `w_{i+1} = (p - a) / (b - a)`. The n-d weight
//! is the product of the per-axis weights, renormalized to sum to one.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::model::{predict_batch, ModelParams};
use crate::nn::{RngStream, Scalar};

/// A point covered by a tile: `(point index, local coordinate)`.
pub type TileMember = (usize, Vec<f64>);

/// Local coordinates of the points a tile covers and their `(point index, weight)`.
type TileBucket<T> = (Vec<T>, Vec<(usize, f64)>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    extent: Vec<usize>,
    tile_size: Vec<usize>,
    overlap: Vec<usize>,
    #[serde(skip)]
    origins: Vec<Vec<usize>>,
}

/// One tile: its multi-index and global origin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileRef {
    pub index: Vec<usize>,
    pub origin: Vec<usize>,
    pub size: Vec<usize>,
}

impl TileRef {
    /// `x = (p - origin) / tile_size` per axis.
    pub fn to_local(&self, p: &[f64]) -> Result<Vec<f64>> {
        ensure_len("point", self.origin.len(), p.len())?;
        let mut out = Vec::with_capacity(p.len());
        for ((&pi, &o), &t) in p.iter().zip(&self.origin).zip(&self.size) {
            let x = (pi - o as f64) / t as f64;
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::OutOfDomain {
                    point: p.to_vec(),
                    domain: format!("tile {:?}", self.index),
                });
            }
            out.push(x);
        }
        Ok(out)
    }

    /// Inverse of [`to_local`](Self::to_local).
    pub fn to_global(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.origin)
            .zip(&self.size)
            .map(|((xi, &o), &t)| o as f64 + xi * t as f64)
            .collect()
    }
}

/// Free-function form of [`TileRef::to_local`].
pub fn to_local(tile: &TileRef, p: &[f64]) -> Result<Vec<f64>> {
    tile.to_local(p)
}

impl TileGrid {
    pub fn new(extent: Vec<usize>, tile_size: Vec<usize>, overlap: Vec<usize>) -> Result<Self> {
        let n = extent.len();
        if n == 0 {
            return Err(Error::config("tile grid needs at least one axis"));
        }
        ensure_len("tile size axes", n, tile_size.len())?;
        ensure_len("overlap axes", n, overlap.len())?;
        let mut origins = Vec::with_capacity(n);
        for a in 0..n {
            let (e, t, o) = (extent[a], tile_size[a], overlap[a]);
            if t == 0 || o >= t {
                return Err(Error::config(format!(
                    "axis {a}: need 0 <= overlap < tile size (tile {t}, overlap {o})"
                )));
            }
            if e < t {
                return Err(Error::config(format!(
                    "axis {a}: extent {e} smaller than tile size {t}"
                )));
            }
            let stride = t - o;
            let count = (e - o).div_ceil(stride);
            let axis: Vec<usize> = (0..count).map(|i| (i * stride).min(e - t)).collect();
            // More than two tiles over one point would break n-linear blending.
            for w in axis.windows(3) {
                if w[2] < w[0] + t {
                    return Err(Error::config(format!(
                        "axis {a}: tile {t} / overlap {o} over extent {e} puts some points in three tiles"
                    )));
                }
            }
            origins.push(axis);
        }
        Ok(Self {
            extent,
            tile_size,
            overlap,
            origins,
        })
    }

    /// Same tile size and overlap on every axis.
    pub fn uniform(extent: Vec<usize>, tile: usize, overlap: usize) -> Result<Self> {
        let n = extent.len();
        Self::new(extent, vec![tile; n], vec![overlap; n])
    }

    /// Rebuilds derived state after deserialization.
    pub fn rebuild(self) -> Result<Self> {
        Self::new(self.extent, self.tile_size, self.overlap)
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent
    }

    pub fn tile_size(&self) -> &[usize] {
        &self.tile_size
    }

    pub fn overlap(&self) -> &[usize] {
        &self.overlap
    }

    pub fn stride(&self) -> Vec<usize> {
        self.tile_size.iter().zip(&self.overlap).map(|(t, o)| t - o).collect()
    }

    pub fn tiles_per_axis(&self) -> Vec<usize> {
        self.origins.iter().map(Vec::len).collect()
    }

    pub fn tile_count(&self) -> usize {
        self.origins.iter().map(Vec::len).product()
    }

    /// Samples in one tile, `product(tile_size)`.
    pub fn tile_volume(&self) -> usize {
        self.tile_size.iter().product()
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        let mut lin = 0;
        for a in (0..self.dim()).rev() {
            lin = lin * self.origins[a].len() + index[a];
        }
        lin
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.dim());
        for axis in &self.origins {
            idx.push(lin % axis.len());
            lin /= axis.len();
        }
        idx
    }

    pub fn tile(&self, lin: usize) -> TileRef {
        let index = self.multi_index(lin);
        let origin = index.iter().zip(&self.origins).map(|(&i, o)| o[i]).collect();
        TileRef {
            index,
            origin,
            size: self.tile_size.clone(),
        }
    }

    pub fn tiles(&self) -> impl Iterator<Item = TileRef> + '_ {
        (0..self.tile_count()).map(|i| self.tile(i))
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        ensure_len("point", self.dim(), p.len())?;
        let inside = p
            .iter()
            .zip(&self.extent)
            .all(|(&v, &e)| v.is_finite() && v >= 0.0 && v <= e as f64);
        if inside {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                point: p.to_vec(),
                domain: format!("extent {:?}", self.extent),
            })
        }
    }

    /// Tiles covering `p` along one axis with their 1-d ramp weights.
    fn axis_cover(&self, a: usize, p: f64) -> Vec<(usize, f64)> {
        let origins = &self.origins[a];
        let t = self.tile_size[a] as f64;
        let last = origins.len() - 1;
        let covers = |i: usize| {
            let o = origins[i] as f64;
            p >= o && (p < o + t || (i == last && p <= o + t))
        };
        // Tiles are sorted by origin; start near the stride estimate.
        let stride = (self.tile_size[a] - self.overlap[a]) as f64;
        let guess = ((p / stride).floor() as usize).min(last);
        let lo = guess.saturating_sub(2);
        let hi = (guess + 2).min(last);
        let mut out = Vec::with_capacity(2);
        for i in lo..=hi {
            if covers(i) {
                let o = origins[i] as f64;
                let mut w: f64 = 1.0;
                if i > 0 {
                    let prev_end = origins[i - 1] as f64 + t;
                    if prev_end > o {
                        w = w.min(((p - o) / (prev_end - o)).clamp(0.0, 1.0));
                    }
                }
                if i < last {
                    let next = origins[i + 1] as f64;
                    if next < o + t {
                        w = w.min(((o + t - p) / (o + t - next)).clamp(0.0, 1.0));
                    }
                }
                out.push((i, w));
            }
        }
        out
    }

    /// All tiles whose footprint contains `p`.
    pub fn tiles_containing(&self, p: &[f64]) -> Result<Vec<TileRef>> {
        Ok(self.blend_weights(p)?.into_iter().map(|(t, _)| t).collect())
    }

    /// Covering tiles with n-linear blend weights summing to one.
    pub fn blend_weights(&self, p: &[f64]) -> Result<Vec<(TileRef, f64)>> {
        self.check_point(p)?;
        let axes: Vec<Vec<(usize, f64)>> = (0..self.dim()).map(|a| self.axis_cover(a, p[a])).collect();
        let mut out: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
        for cover in &axes {
            let mut next = Vec::with_capacity(out.len() * cover.len());
            for (idx, w) in &out {
                for &(i, wi) in cover {
                    let mut j = idx.clone();
                    j.push(i);
                    next.push((j, w * wi));
                }
            }
            out = next;
        }
        let total: f64 = out.iter().map(|(_, w)| w).sum();
        // Every axis has a tile with weight 1 or a pair summing to 1, so
        // total > 0; renormalize for rounding.
        Ok(out
            .into_iter()
            .map(|(index, w)| {
                let lin = self.linear_index(&index);
                (self.tile(lin), w / total)
            })
            .collect())
    }

    /// Every `(tile, point)` membership of a point list (row-major `count x n`),
    /// grouped by tile: `result[tile] = [(point index, local coordinate)]`.
    pub fn assign_points(&self, coords: &[f64]) -> Result<Vec<Vec<TileMember>>> {
        let n = self.dim();
        let mut out = vec![Vec::new(); self.tile_count()];
        for (pi, p) in coords.chunks_exact(n).enumerate() {
            for tile in self.tiles_containing(p)? {
                let lin = self.linear_index(&tile.index);
                out[lin].push((pi, tile.to_local(p)?));
            }
        }
        Ok(out)
    }
}

/// One latent code per tile, row-major over tile indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T> {
    grid: TileGrid,
    latent_dim: usize,
    codes: Vec<T>,
}

impl<T: Scalar> Codebook<T> {
    pub fn zeros(grid: TileGrid, latent_dim: usize) -> Self {
        let codes = vec![T::zero(); grid.tile_count() * latent_dim];
        Self {
            grid,
            latent_dim,
            codes,
        }
    }

    pub fn from_codes(grid: TileGrid, latent_dim: usize, codes: Vec<T>) -> Result<Self> {
        ensure_len("codebook entries", grid.tile_count() * latent_dim, codes.len())?;
        Ok(Self {
            grid,
            latent_dim,
            codes,
        })
    }

    /// i.i.d. `N(0, scale^2)` codes.
    pub fn random(grid: TileGrid, latent_dim: usize, scale: f64, rng: &mut RngStream) -> Self {
        let codes = (0..grid.tile_count() * latent_dim)
            .map(|_| T::from_f64(rng.normal(0.0, scale)))
            .collect();
        Self {
            grid,
            latent_dim,
            codes,
        }
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn len(&self) -> usize {
        self.grid.tile_count()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, tile: usize) -> &[T] {
        &self.codes[tile * self.latent_dim..(tile + 1) * self.latent_dim]
    }

    pub fn code_mut(&mut self, tile: usize) -> &mut [T] {
        &mut self.codes[tile * self.latent_dim..(tile + 1) * self.latent_dim]
    }

    pub fn codes(&self) -> &[T] {
        &self.codes
    }

    pub fn cast<U: Scalar>(&self) -> Codebook<U> {
        Codebook {
            grid: self.grid.clone(),
            latent_dim: self.latent_dim,
            codes: crate::nn::cast_vec(&self.codes),
        }
    }
}

/// `sum_k w_k f(to_local(tile_k, p); z_k)`.
pub fn blended_decode<T: Scalar>(params: &ModelParams<T>, codebook: &Codebook<T>, p: &[f64]) -> Result<Vec<f64>> {
    check_compatible(params, codebook)?;
    let m = params.config().output_dim;
    let mut y = vec![0.0; m];
    for (tile, w) in codebook.grid().blend_weights(p)? {
        let x: Vec<T> = tile.to_local(p)?.into_iter().map(T::from_f64).collect();
        let lin = codebook.grid().linear_index(&tile.index);
        let out = crate::model::model_forward(params, &x, codebook.code(lin))?;
        for (acc, v) in y.iter_mut().zip(out) {
            *acc += w * v.as_f64();
        }
    }
    Ok(y)
}

pub(crate) fn check_compatible<T: Scalar>(params: &ModelParams<T>, codebook: &Codebook<T>) -> Result<()> {
    let cfg = params.config();
    ensure_len("codebook dimension", cfg.input_dim, codebook.grid().dim())?;
    if cfg.uses_latent() {
        ensure_len("codebook latent dimension", cfg.latent_dim, codebook.latent_dim())?;
    }
    Ok(())
}

/// Blended decode of many points (row-major `count x n`), grouping the work
/// per tile so each tile's modulation runs once. Matches [`blended_decode`]
/// point by point.
pub fn blended_decode_many<T: Scalar>(
    params: &ModelParams<T>,
    codebook: &Codebook<T>,
    points: &[f64],
) -> Result<Vec<f64>> {
    check_compatible(params, codebook)?;
    let grid = codebook.grid();
    let n = grid.dim();
    let m = params.config().output_dim;
    let count = points.len() / n;
    let mut per_tile: Vec<TileBucket<T>> = vec![Default::default(); grid.tile_count()];
    for (pi, p) in points.chunks_exact(n).enumerate() {
        for (tile, w) in grid.blend_weights(p)? {
            let lin = grid.linear_index(&tile.index);
            let entry = &mut per_tile[lin];
            entry.0.extend(tile.to_local(p)?.into_iter().map(T::from_f64));
            entry.1.push((pi, w));
        }
    }
    let mut out = vec![0.0; count * m];
    for (lin, (coords, targets)) in per_tile.iter().enumerate() {
        if targets.is_empty() {
            continue;
        }
        let y = predict_batch(params, coords, codebook.code(lin))?;
        for ((pi, w), row) in targets.iter().zip(y.chunks_exact(m)) {
            for (acc, v) in out[pi * m..(pi + 1) * m].iter_mut().zip(row) {
                *acc += w * v.as_f64();
            }
        }
    }
    Ok(out)
}
