//! Bidirectional Chamfer distance: mean squared nearest-neighbour distance
//! from A to B plus from B to A.

use crate::error::{Error, Result};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check(a: &[f64], b: &[f64], dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::config("point dimension must be >= 1"));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("point set"));
    }
    for s in [a, b] {
        if s.len() % dim != 0 {
            return Err(Error::dims("point set", s.len() / dim * dim, s.len()));
        }
    }
    Ok(())
}

/// Reference `O(|A| |B|)` implementation. Points are row-major `count x dim`.
pub fn chamfer_distance_brute(a: &[f64], b: &[f64], dim: usize) -> Result<f64> {
    check(a, b, dim)?;
    let one_way = |from: &[f64], to: &[f64]| {
        let total: f64 = from
            .chunks_exact(dim)
            .map(|p| {
                to.chunks_exact(dim)
                    .map(|q| sq_dist(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / (from.len() / dim) as f64
    };
    Ok(one_way(a, b) + one_way(b, a))
}

/// kd-tree accelerated Chamfer distance; same value as the brute force.
pub fn chamfer_distance(a: &[f64], b: &[f64], dim: usize) -> Result<f64> {
    check(a, b, dim)?;
    let one_way = |from: &[f64], to: &[f64]| {
        let tree = KdTree::new(to, dim);
        let total: f64 = from.chunks_exact(dim).map(|p| tree.nearest(p).1).sum();
        total / (from.len() / dim) as f64
    };
    Ok(one_way(a, b) + one_way(b, a))
}

/// Static kd-tree over row-major points, split at the median of the
/// cycling axis.
pub struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    /// Point indices in tree order: node `[lo, hi)` has its split at the middle.
    order: Vec<usize>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [f64], dim: usize) -> Self {
        let mut order: Vec<usize> = (0..points.len() / dim).collect();
        let mut tree = Self {
            points,
            dim,
            order: Vec::new(),
        };
        tree.build(&mut order, 0);
        tree.order = order;
        tree
    }

    fn coord(&self, i: usize, axis: usize) -> f64 {
        self.points[i * self.dim + axis]
    }

    fn build(&self, idx: &mut [usize], depth: usize) {
        if idx.len() <= 1 {
            return;
        }
        let axis = depth % self.dim;
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&x, &y| self.coord(x, axis).total_cmp(&self.coord(y, axis)));
        let (left, right) = idx.split_at_mut(mid);
        self.build(left, depth + 1);
        self.build(&mut right[1..], depth + 1);
    }

    /// Index and squared distance of the nearest point to `q`.
    pub fn nearest(&self, q: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.order.len(), 0, &mut best);
        best
    }

    fn search(&self, q: &[f64], lo: usize, hi: usize, depth: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let i = self.order[mid];
        let p = &self.points[i * self.dim..(i + 1) * self.dim];
        let d = sq_dist(p, q);
        if d < best.1 {
            *best = (i, d);
        }
        let axis = depth % self.dim;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        if diff * diff < best.1 {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}
