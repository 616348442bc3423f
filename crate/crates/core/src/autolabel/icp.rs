//! Yaw-constrained iterative closest point.
//!
//! Rotation is restricted to the vertical axis: upright boxes can only
//! disagree by heading, and the constraint keeps sparse, partial views
//! from being "explained" by physically impossible tilts.

use thiserror::Error;

use crate::geom::{NNIndex, Point3, RigidTransform};

#[derive(Debug, Error)]
pub enum IcpError {
    #[error("insufficient overlap: {pairs} correspondences within the distance cap (need 3)")]
    InsufficientOverlap { pairs: usize },
}

/// Median nearest-neighbor spacing of a point set; the correspondence cap
/// is derived from it. Returns 0 for sets smaller than two points.
pub fn median_nn_spacing(points: &[Point3]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let tree = NNIndex::build(points).expect("non-empty");
    let mut dists: Vec<f64> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| tree.nearest_excluding(p, i).map(|(_, d2)| d2.sqrt()))
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    dists[dists.len() / 2]
}

/// In-cap correspondences of the transformed source against the target.
fn correspondences(
    source: &[Point3],
    tree: &NNIndex,
    t: &RigidTransform,
    cap: f64,
) -> Vec<(usize, usize, f64)> {
    let cap2 = cap * cap;
    source
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let (j, d2) = tree.nearest(&t.apply(s));
            (d2 <= cap2).then_some((i, j, d2))
        })
        .collect()
}

/// Closed-form yaw + translation minimizing the summed squared pair
/// distances: 2D Procrustes in the xy-plane, mean alignment in z.
fn solve_yaw_procrustes(
    source: &[Point3],
    target: &[Point3],
    pairs: &[(usize, usize, f64)],
) -> RigidTransform {
    let n = pairs.len() as f64;
    let mut s_mean = Point3::ZERO;
    let mut t_mean = Point3::ZERO;
    for (i, j, _) in pairs {
        s_mean += source[*i];
        t_mean += target[*j];
    }
    s_mean = s_mean * (1.0 / n);
    t_mean = t_mean * (1.0 / n);

    let (mut num, mut den) = (0.0, 0.0);
    for (i, j, _) in pairs {
        let s = source[*i] - s_mean;
        let t = target[*j] - t_mean;
        num += s.x * t.y - s.y * t.x;
        den += s.x * t.x + s.y * t.y;
    }
    // All matched source points coincident: no rotation signal, keep 0.
    let yaw = if num == 0.0 && den == 0.0 { 0.0 } else { num.atan2(den) };

    let (sin, cos) = yaw.sin_cos();
    let tx = t_mean.x - (cos * s_mean.x - sin * s_mean.y);
    let ty = t_mean.y - (sin * s_mean.x + cos * s_mean.y);
    let tz = t_mean.z - s_mean.z;
    RigidTransform::from_yaw_translation(yaw, Point3::new(tx, ty, tz))
}

fn mean_pair_distance(
    source: &[Point3],
    target: &[Point3],
    t: &RigidTransform,
    pairs: &[(usize, usize, f64)],
) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|(i, j, _)| (t.apply(&source[*i]) - target[*j]).norm())
        .sum();
    total / pairs.len() as f64
}

/// Registers `source` onto `target`, starting from `init`.
///
/// Alternates nearest-neighbor correspondence (capped at `cap`) with the
/// closed-form yaw + translation solve until the mean matched distance
/// stops changing by more than `tol` or `max_iters` is reached. Returns
/// the absolute transform and the final mean matched-point distance.
pub fn yaw_icp(
    source: &[Point3],
    target: &[Point3],
    init: &RigidTransform,
    max_iters: usize,
    tol: f64,
    cap: f64,
) -> Result<(RigidTransform, f64), IcpError> {
    if target.is_empty() || source.is_empty() {
        return Err(IcpError::InsufficientOverlap { pairs: 0 });
    }
    let tree = NNIndex::build(target).expect("non-empty target");
    let mut t = *init;
    let mut prev_eps = f64::INFINITY;
    for _ in 0..max_iters {
        let pairs = correspondences(source, &tree, &t, cap);
        if pairs.len() < 3 {
            return Err(IcpError::InsufficientOverlap { pairs: pairs.len() });
        }
        t = solve_yaw_procrustes(source, target, &pairs);
        let eps = mean_pair_distance(source, target, &t, &pairs);
        if (prev_eps - eps).abs() < tol {
            break;
        }
        prev_eps = eps;
    }
    // Report the error over the correspondences induced by the final
    // transform, which is what downstream init selection compares.
    let pairs = correspondences(source, &tree, &t, cap);
    if pairs.len() < 3 {
        return Err(IcpError::InsufficientOverlap { pairs: pairs.len() });
    }
    Ok((t, mean_pair_distance(source, target, &t, &pairs)))
}
