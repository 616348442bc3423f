//! Ground removal and static-point identification.
//!
//! Splits every frame into ground / static / dynamic points. Ground is a
//! RANSAC-fitted close-to-horizontal plane; the remaining points are
//! compared against the previous frames' non-ground points in the world
//! frame, and anything that has a near neighbor there cannot have moved
//! faster than the velocity threshold, so it is marked static. Only the
//! dynamic remainder is handed to the flow stage.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Sequence;
use crate::geom::{centroid, NNIndex, Point3};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("ground fitting needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("no ground found: no plane within tilt bound reached inlier fraction {min_frac}")]
    NoGround { min_frac: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub ransac_iters: usize,
    /// Inlier distance to the ground plane, meters.
    pub tau_g_m: f64,
    /// Maximum plane tilt from horizontal, degrees.
    pub max_tilt_deg: f64,
    /// Minimum fraction of points the plane must explain.
    pub min_inlier_frac: f64,
    /// A point is static when a previous-frame neighbor sits closer than
    /// this speed times the frame interval.
    pub static_v_thresh_mps: f64,
    /// How many previous frames form the comparison set (1..=3).
    pub static_window: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            ransac_iters: 200,
            tau_g_m: 0.15,
            max_tilt_deg: 15.0,
            min_inlier_frac: 0.15,
            static_v_thresh_mps: 0.2,
            static_window: 1,
        }
    }
}

/// Fitted ground plane `normal . p = offset` with `|normal| = 1` and the
/// normal pointing up.
#[derive(Debug, Clone, Copy)]
pub struct GroundModel {
    pub normal: Point3,
    pub offset: f64,
    pub tau_g: f64,
}

impl GroundModel {
    pub fn distance(&self, p: &Point3) -> f64 {
        (self.normal.dot(p) - self.offset).abs()
    }

    pub fn is_ground(&self, p: &Point3) -> bool {
        self.distance(p) <= self.tau_g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Ground,
    Static,
    Dynamic,
}

/// Per-point motion labels aligned with the frame's point indices.
#[derive(Debug, Clone)]
pub struct MotionMask {
    pub labels: Vec<PointClass>,
}

impl MotionMask {
    pub fn dynamic_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == PointClass::Dynamic)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, class: PointClass) -> usize {
        self.labels.iter().filter(|c| **c == class).count()
    }
}

/// One preprocessed frame: its (possibly absent) ground model, the motion
/// mask, and the frame's points in the world frame.
#[derive(Debug, Clone)]
pub struct PreprocessedFrame {
    pub ground: Option<GroundModel>,
    pub mask: MotionMask,
    pub world_points: Vec<Point3>,
}

/// Smallest eigenvector of a symmetric 3x3 matrix via cyclic Jacobi
/// rotations. Plenty for plane refits; no external solver needed.
fn smallest_eigenvector_sym3(mut a: [[f64; 3]; 3]) -> Point3 {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..32 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-24 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-18 {
                continue;
            }
            let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in &mut v {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut best = 0;
    for k in 1..3 {
        if a[k][k] < a[best][best] {
            best = k;
        }
    }
    Point3::new(v[0][best], v[1][best], v[2][best])
}

/// Fits the ground plane by seeded RANSAC and labels its inliers.
///
/// Returns the refitted model and a per-point ground mask. Fails when no
/// close-to-horizontal plane explains at least `min_inlier_frac` of the
/// points; the caller is expected to continue without ground removal.
pub fn remove_ground(
    points: &[Point3],
    cfg: &PreprocessConfig,
    seed: u64,
) -> Result<(GroundModel, Vec<bool>), PreprocessError> {
    let n = points.len();
    if n < 3 {
        return Err(PreprocessError::TooFewPoints(n));
    }
    let min_cos = cfg.max_tilt_deg.to_radians().cos();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Point3, f64)> = None;

    for _ in 0..cfg.ransac_iters {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n);
        while j == i {
            j = rng.gen_range(0..n);
        }
        let mut k = rng.gen_range(0..n);
        while k == i || k == j {
            k = rng.gen_range(0..n);
        }
        let normal = match (points[j] - points[i]).cross(&(points[k] - points[i])).normalized() {
            Some(u) => u,
            None => continue, // collinear sample
        };
        let normal = if normal.z < 0.0 { -normal } else { normal };
        if normal.z < min_cos {
            continue;
        }
        let offset = normal.dot(&points[i]);
        let inliers = points.iter().filter(|p| (normal.dot(p) - offset).abs() <= cfg.tau_g_m).count();
        if best.map_or(true, |(c, _, _)| inliers > c) {
            best = Some((inliers, normal, offset));
        }
    }

    let (count, normal, offset) = best.ok_or(PreprocessError::NoGround { min_frac: cfg.min_inlier_frac })?;
    if (count as f64) < cfg.min_inlier_frac * n as f64 {
        return Err(PreprocessError::NoGround { min_frac: cfg.min_inlier_frac });
    }

    // Refit on the consensus set: orthogonal least squares through the
    // inlier centroid. Falls back to the sampled plane if the refit drifts
    // past the tilt bound (possible when inliers capture a curb edge).
    let inlier_pts: Vec<Point3> =
        points.iter().filter(|p| (normal.dot(p) - offset).abs() <= cfg.tau_g_m).copied().collect();
    let c = centroid(&inlier_pts).expect("inlier count >= min fraction of n >= 3");
    let mut cov = [[0.0f64; 3]; 3];
    for p in &inlier_pts {
        let d = *p - c;
        let v = [d.x, d.y, d.z];
        for (r, vr) in v.iter().enumerate() {
            for (s, vs) in v.iter().enumerate() {
                cov[r][s] += vr * vs;
            }
        }
    }
    let (normal, offset) = match smallest_eigenvector_sym3(cov).normalized() {
        Some(u) => {
            let u = if u.z < 0.0 { -u } else { u };
            if u.z >= min_cos {
                (u, u.dot(&c))
            } else {
                (normal, offset)
            }
        }
        None => (normal, offset),
    };

    let model = GroundModel { normal, offset, tau_g: cfg.tau_g_m };
    let mask = points.iter().map(|p| model.is_ground(p)).collect();
    Ok((model, mask))
}

/// Marks points static by a per-point nearest-neighbor test against the
/// union of earlier frames' non-ground points (world frame). Returns a
/// mask aligned with `curr`; with no earlier points, nothing is static.
pub fn mark_static(curr: &[Point3], prev_union: &[Point3], dt: f64, v_thresh: f64) -> Vec<bool> {
    if prev_union.is_empty() || curr.is_empty() {
        return vec![false; curr.len()];
    }
    let index = NNIndex::build(prev_union).expect("non-empty union");
    let limit = v_thresh * dt;
    curr.iter().map(|p| index.nearest(p).1.sqrt() < limit).collect()
}

/// Runs ground removal and static marking over a whole sequence.
///
/// Ground fitting failures are tolerated per frame (the frame simply keeps
/// all its points as static/dynamic candidates), matching the behavior of
/// real scenes where the ground is occluded.
pub fn classify_sequence(seq: &Sequence, cfg: &PreprocessConfig, seed: u64) -> Vec<PreprocessedFrame> {
    let mut out: Vec<PreprocessedFrame> = Vec::with_capacity(seq.len());
    // Non-ground world points of already-processed frames, for the window.
    let mut prev_non_ground: Vec<Vec<Point3>> = Vec::with_capacity(seq.len());
    let window = cfg.static_window.max(1);

    for frame in &seq.frames {
        let world = frame.to_world();
        let (ground, ground_mask) = match remove_ground(&world, cfg, crate::mix_seed(seed, frame.index as u64)) {
            Ok((model, mask)) => (Some(model), mask),
            Err(err) => {
                log::warn!("frame {}: {err}; keeping all points", frame.index);
                (None, vec![false; world.len()])
            }
        };

        let candidates: Vec<Point3> = world
            .iter()
            .zip(&ground_mask)
            .filter(|(_, g)| !**g)
            .map(|(p, _)| *p)
            .collect();
        let union: Vec<Point3> = prev_non_ground
            .iter()
            .rev()
            .take(window)
            .flat_map(|f| f.iter().copied())
            .collect();
        let static_mask = mark_static(&candidates, &union, seq.dt(), cfg.static_v_thresh_mps);

        let mut labels = Vec::with_capacity(world.len());
        let mut ci = 0;
        for g in &ground_mask {
            if *g {
                labels.push(PointClass::Ground);
            } else {
                labels.push(if static_mask[ci] { PointClass::Static } else { PointClass::Dynamic });
                ci += 1;
            }
        }

        prev_non_ground.push(candidates);
        out.push(PreprocessedFrame { ground, mask: MotionMask { labels }, world_points: world });
    }
    out
}
