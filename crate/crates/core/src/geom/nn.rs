//! Nearest-neighbor index (k-d tree) and the Chamfer distance built on it.

use super::{dist2, GeomError, Point3};

/// A k-d tree over a fixed point set.
///
/// Queries return exactly the same answer as a brute-force scan, including
/// the tie rule: among equidistant points the lowest index wins. Distances
/// are squared Euclidean computed by [`dist2`], so results are bit-identical
/// to any other code using the same formula.
#[derive(Debug)]
pub struct NNIndex {
    points: Vec<Point3>,
    root: Option<Box<Node>>,
}

#[derive(Debug)]
struct Node {
    idx: usize,
    axis: usize,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

fn coord(p: &Point3, axis: usize) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

impl NNIndex {
    /// Builds the index. Errors on an empty input set.
    pub fn build(points: &[Point3]) -> Result<NNIndex, GeomError> {
        if points.is_empty() {
            return Err(GeomError::EmptyPointSet);
        }
        let mut idxs: Vec<usize> = (0..points.len()).collect();
        let root = build_node(points, &mut idxs, 0);
        Ok(NNIndex { points: points.to_vec(), root })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Index and squared distance of the nearest point to `q`.
    pub fn nearest(&self, q: &Point3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        nearest_rec(self.root.as_deref(), &self.points, q, usize::MAX, &mut best);
        best
    }

    /// Nearest point to `q` skipping index `exclude`; `None` when the set
    /// holds no other point.
    pub fn nearest_excluding(&self, q: &Point3, exclude: usize) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        nearest_rec(self.root.as_deref(), &self.points, q, exclude, &mut best);
        if best.0 == usize::MAX {
            None
        } else {
            Some(best)
        }
    }

    /// Indices of all points within `radius` of `q` (inclusive), ascending.
    pub fn within_radius(&self, q: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        radius_rec(self.root.as_deref(), &self.points, q, radius * radius, &mut out);
        out.sort_unstable();
        out
    }
}

fn build_node(points: &[Point3], idxs: &mut [usize], depth: usize) -> Option<Box<Node>> {
    if idxs.is_empty() {
        return None;
    }
    let axis = depth % 3;
    // Ties on the split coordinate are ordered by index so that the tree
    // shape is independent of the incoming index permutation.
    idxs.sort_unstable_by(|&a, &b| {
        coord(&points[a], axis)
            .partial_cmp(&coord(&points[b], axis))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mid = idxs.len() / 2;
    let idx = idxs[mid];
    let (lo, rest) = idxs.split_at_mut(mid);
    let hi = &mut rest[1..];
    Some(Box::new(Node {
        idx,
        axis,
        left: build_node(points, lo, depth + 1),
        right: build_node(points, hi, depth + 1),
    }))
}

fn better(cand: (usize, f64), best: (usize, f64)) -> bool {
    cand.1 < best.1 || (cand.1 == best.1 && cand.0 < best.0)
}

fn nearest_rec(
    node: Option<&Node>,
    points: &[Point3],
    q: &Point3,
    exclude: usize,
    best: &mut (usize, f64),
) {
    let Some(n) = node else { return };
    if n.idx != exclude {
        let d2 = dist2(q, &points[n.idx]);
        if better((n.idx, d2), *best) {
            *best = (n.idx, d2);
        }
    }
    let delta = coord(q, n.axis) - coord(&points[n.idx], n.axis);
    let (near, far) = if delta <= 0.0 {
        (n.left.as_deref(), n.right.as_deref())
    } else {
        (n.right.as_deref(), n.left.as_deref())
    };
    nearest_rec(near, points, q, exclude, best);
    // The far half-space can still hold an equidistant lower-index point,
    // so it is visited on exact equality as well.
    if delta * delta <= best.1 {
        nearest_rec(far, points, q, exclude, best);
    }
}

fn radius_rec(
    node: Option<&Node>,
    points: &[Point3],
    q: &Point3,
    r2: f64,
    out: &mut Vec<usize>,
) {
    let Some(n) = node else { return };
    if dist2(q, &points[n.idx]) <= r2 {
        out.push(n.idx);
    }
    let delta = coord(q, n.axis) - coord(&points[n.idx], n.axis);
    let (near, far) = if delta <= 0.0 {
        (n.left.as_deref(), n.right.as_deref())
    } else {
        (n.right.as_deref(), n.left.as_deref())
    };
    radius_rec(near, points, q, r2, out);
    if delta * delta <= r2 {
        radius_rec(far, points, q, r2, out);
    }
}

/// One-directional Chamfer distance: the mean over `query` of the squared
/// distance to the nearest point in `target`. An empty query yields 0.
///
/// The target's emptiness is handled where the index is built
/// ([`NNIndex::build`] refuses empty sets), so this function is total.
pub fn chamfer(query: &[Point3], target: &NNIndex) -> f64 {
    if query.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for q in query {
        sum += target.nearest(q).1;
    }
    sum / query.len() as f64
}
