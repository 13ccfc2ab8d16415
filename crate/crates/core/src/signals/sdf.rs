//! Analytic signed distance scenes, surface-biased point sampling and grid
//! metrics for learned distance fields.
//!
//! Point-cloud files: magic `MODP`, u32 version 1, u64 point count, then
//! `count x 3` little-endian f32 coordinates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SampledSignal;
use crate::error::{Error, Result};
use crate::nn::RngStream;

pub type Vec3 = [f64; 3];

/// Scenes built from exact primitives. A union takes the minimum of its
/// children, which is exact outside overlaps and a bound inside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SdfShape {
    Sphere {
        center: Vec3,
        radius: f64,
    },
    Box {
        center: Vec3,
        half_extents: Vec3,
    },
    /// Ring in the plane normal to the y axis.
    Torus {
        center: Vec3,
        major: f64,
        minor: f64,
    },
    Union {
        children: Vec<SdfShape>,
    },
}

impl SdfShape {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            SdfShape::Sphere { radius, .. } => *radius > 0.0,
            SdfShape::Box { half_extents, .. } => half_extents.iter().all(|h| *h > 0.0),
            SdfShape::Torus { major, minor, .. } => *major > 0.0 && *minor > 0.0,
            SdfShape::Union { children } => {
                for c in children {
                    c.validate()?;
                }
                !children.is_empty()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("degenerate shape {self:?}")))
        }
    }

    /// Sphere, box and torus, pairwise disjoint and inside the unit sphere.
    pub fn demo_scene() -> Self {
        SdfShape::Union {
            children: vec![
                SdfShape::Sphere {
                    center: [-0.45, 0.2, 0.0],
                    radius: 0.3,
                },
                SdfShape::Box {
                    center: [0.4, 0.25, 0.05],
                    half_extents: [0.2, 0.2, 0.2],
                },
                SdfShape::Torus {
                    center: [0.0, -0.45, 0.0],
                    major: 0.3,
                    minor: 0.1,
                },
            ],
        }
    }
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn sdf_eval(shape: &SdfShape, p: Vec3) -> f64 {
    match shape {
        SdfShape::Sphere { center, radius } => norm(sub(p, *center)) - radius,
        SdfShape::Box { center, half_extents } => {
            let d = sub(p, *center);
            let q: Vec3 = std::array::from_fn(|i| d[i].abs() - half_extents[i]);
            let outside = norm([q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)]);
            outside + q[0].max(q[1]).max(q[2]).min(0.0)
        }
        SdfShape::Torus { center, major, minor } => {
            let d = sub(p, *center);
            let ring = d[0].hypot(d[2]) - major;
            ring.hypot(d[1]) - minor
        }
        SdfShape::Union { children } => children.iter().map(|c| sdf_eval(c, p)).fold(f64::INFINITY, f64::min),
    }
}

fn gradient(shape: &SdfShape, p: Vec3) -> Vec3 {
    let h = 1e-6;
    std::array::from_fn(|i| {
        let mut a = p;
        let mut b = p;
        a[i] += h;
        b[i] -= h;
        (sdf_eval(shape, a) - sdf_eval(shape, b)) / (2.0 * h)
    })
}

pub fn uniform_in_unit_sphere(rng: &mut RngStream) -> Vec3 {
    loop {
        let p = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
        if norm(p) <= 1.0 {
            return p;
        }
    }
}

/// Projects a point onto the zero level set by repeated `p - sdf * grad`.
fn project_to_surface(shape: &SdfShape, mut p: Vec3) -> Vec3 {
    for _ in 0..8 {
        let d = sdf_eval(shape, p);
        if d.abs() < 1e-10 {
            break;
        }
        let g = gradient(shape, p);
        let gn = norm(g);
        if gn < 1e-12 {
            break;
        }
        for i in 0..3 {
            p[i] -= d * g[i] / gn;
        }
    }
    p
}

/// `count` points: `round(count * near_fraction)` surface points perturbed by
/// `N(0, near_sigma^2)` per axis, the rest uniform in the unit sphere. Values
/// are exact distances. Coordinates are in world units; `extent` is unused
/// and left as `[2, 2, 2]` (the `[-1, 1]^3` box).
pub fn sample_sdf_points(
    shape: &SdfShape,
    count: usize,
    near_fraction: f64,
    near_sigma: f64,
    rng: &mut RngStream,
) -> Result<SampledSignal> {
    shape.validate()?;
    if !(0.0..=1.0).contains(&near_fraction) || near_sigma < 0.0 {
        return Err(Error::config(format!(
            "near fraction {near_fraction} must be in [0, 1] and sigma {near_sigma} non-negative"
        )));
    }
    let near = ((count as f64) * near_fraction).round() as usize;
    let mut coords = Vec::with_capacity(count * 3);
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let p = if i < near {
            let s = project_to_surface(shape, uniform_in_unit_sphere(rng));
            [
                s[0] + rng.normal(0.0, near_sigma),
                s[1] + rng.normal(0.0, near_sigma),
                s[2] + rng.normal(0.0, near_sigma),
            ]
        } else {
            uniform_in_unit_sphere(rng)
        };
        coords.extend_from_slice(&p);
        values.push(sdf_eval(shape, p));
    }
    SampledSignal::scattered(vec![2, 2, 2], 1, coords, values)
}

/// Maps world points in `[-1, 1]^3` affinely onto `[0, extent]^3`.
pub fn world_to_grid(points: &[f64], extent: usize) -> Vec<f64> {
    let s = extent as f64 / 2.0;
    points.iter().map(|v| (v + 1.0) * s).collect()
}

/// A world-space point sample re-expressed in the coordinates of a cubic
/// tile grid of side `extent`; values are unchanged.
pub fn sdf_samples_on_grid(world: &SampledSignal, extent: usize) -> Result<SampledSignal> {
    if world.n != 3 || world.dense {
        return Err(Error::config("expected scattered 3-d samples"));
    }
    SampledSignal::scattered(
        vec![extent; 3],
        world.m,
        world_to_grid(&world.coords, extent),
        world.values.clone(),
    )
}

/// Compares `field` with the exact distance at the `resolution^3` cell
/// centers of `[-1, 1]^3`. `field` receives row-major `count x 3` points.
/// Returns `(mean |error|, fraction of cells with matching sign)`; zero
/// counts as positive.
pub fn sdf_grid_metrics(
    mut field: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    shape: &SdfShape,
    resolution: usize,
) -> Result<(f64, f64)> {
    if resolution < 2 {
        return Err(Error::config("grid resolution must be >= 2"));
    }
    let cell = 2.0 / resolution as f64;
    let center = |k: usize| -1.0 + (k as f64 + 0.5) * cell;
    let (mut err, mut agree) = (0.0, 0usize);
    // One z-slice per call keeps memory bounded.
    let mut slab = Vec::with_capacity(resolution * resolution * 3);
    for z in 0..resolution {
        slab.clear();
        for y in 0..resolution {
            for x in 0..resolution {
                slab.extend_from_slice(&[center(x), center(y), center(z)]);
            }
        }
        let pred = field(&slab)?;
        crate::error::ensure_len("field values", resolution * resolution, pred.len())?;
        for (p, v) in slab.chunks_exact(3).zip(pred) {
            let truth = sdf_eval(shape, [p[0], p[1], p[2]]);
            err += (v - truth).abs();
            if (v >= 0.0) == (truth >= 0.0) {
                agree += 1;
            }
        }
    }
    let total = resolution.pow(3) as f64;
    Ok((err / total, agree as f64 / total))
}

const POINTS_MAGIC: &[u8; 4] = b"MODP";

pub fn encode_points(points: &[f64]) -> Result<Vec<u8>> {
    if !points.len().is_multiple_of(3) {
        return Err(Error::dims("point cloud", points.len() / 3 * 3, points.len()));
    }
    let mut out = Vec::with_capacity(16 + points.len() * 4);
    out.extend_from_slice(POINTS_MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&((points.len() / 3) as u64).to_le_bytes());
    for v in points {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_points(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() < 16 || &bytes[..4] != POINTS_MAGIC {
        return Err(Error::format("point cloud", "missing MODP header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != 1 {
        return Err(Error::format("point cloud", format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() != count * 12 {
        return Err(Error::format(
            "point cloud",
            format!("{count} points need {} bytes, found {}", count * 12, body.len()),
        ));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

pub fn save_points(points: &[f64], path: &Path) -> Result<()> {
    crate::format::write_atomic(path, &encode_points(points)?)
}

pub fn load_points(path: &Path) -> Result<Vec<f64>> {
    decode_points(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
