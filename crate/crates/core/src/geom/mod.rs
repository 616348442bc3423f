//! Geometric primitives: points, rigid transforms, boxes, nearest-neighbor
//! queries and clustering. Everything downstream is expressed in terms of
//! these types.

mod boxes;
mod dbscan;
mod nn;

pub use boxes::{
    bev_iou, iou3d, min_area_box_along_direction, pca_major_direction, transform_box, BevRect,
    Box7,
};
pub use dbscan::{clusters_from_labels, dbscan};
pub use nn::{chamfer, NNIndex};

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("operation requires a non-empty point set")]
    EmptyPointSet,
    #[error("direction vector is degenerate (near-zero length)")]
    DegenerateDirection,
    #[error("non-upright transform: rotation is not a pure yaw")]
    NonUprightTransform,
    #[error("matrix is not a rotation (orthonormality violated beyond 1e-9)")]
    NotARotation,
    #[error("invalid box: {0}")]
    InvalidBox(String),
}

/// A point (or vector) in 3D space. Coordinates are finite by construction
/// everywhere the crate produces them; loaders validate on ingest.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(&self, o: &Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm2(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    /// Euclidean norm of the xy projection.
    pub fn norm_bev(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalized(&self) -> Option<Point3> {
        let n = self.norm();
        if n <= 1e-12 {
            None
        } else {
            Some(Point3::new(self.x / n, self.y / n, self.z / n))
        }
    }
}

/// Squared Euclidean distance, evaluated with a fixed operation order so
/// that independent implementations agree bit-for-bit.
#[inline]
pub fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    fn add_assign(&mut self, o: Point3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// An ordered point cloud. Order is stable: every per-point output (flow,
/// status, ground-truth rows) is aligned with it by index.
pub type PointSet = Vec<Point3>;

/// Mean of a point set; `None` when empty.
pub fn centroid(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let mut s = Point3::ZERO;
    for p in points {
        s += *p;
    }
    Some(s * (1.0 / points.len() as f64))
}

/// A proper rigid motion: orthonormal rotation plus translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    pub translation: Point3,
}

const ORTHONORMAL_TOL: f64 = 1e-9;

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: Point3::ZERO,
        }
    }

    /// Validates that `rotation` is orthonormal with determinant +1
    /// (within 1e-9) before accepting it.
    pub fn new(rotation: [[f64; 3]; 3], translation: Point3) -> Result<Self, GeomError> {
        let r = rotation;
        for i in 0..3 {
            for j in 0..3 {
                let mut dot = 0.0;
                for row in &r {
                    dot += row[i] * row[j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > ORTHONORMAL_TOL {
                    return Err(GeomError::NotARotation);
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > 1e-6 {
            return Err(GeomError::NotARotation);
        }
        Ok(RigidTransform { rotation, translation })
    }

    /// Rotation about +z by `yaw` followed by `translation`.
    pub fn from_yaw_translation(yaw: f64, translation: Point3) -> Self {
        let (s, c) = yaw.sin_cos();
        RigidTransform {
            rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            translation,
        }
    }

    pub fn from_translation(translation: Point3) -> Self {
        RigidTransform { translation, ..RigidTransform::identity() }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        let r = &self.rotation;
        Point3::new(
            r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z + self.translation.x,
            r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z + self.translation.y,
            r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z + self.translation.z,
        )
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let a = &self.rotation;
        let b = &other.rotation;
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        let t = self.apply(&other.translation);
        RigidTransform { rotation: r, translation: t }
    }

    pub fn inverse(&self) -> RigidTransform {
        let r = &self.rotation;
        // Transpose of an orthonormal matrix is its inverse.
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let t = &self.translation;
        let ti = Point3::new(
            -(rt[0][0] * t.x + rt[0][1] * t.y + rt[0][2] * t.z),
            -(rt[1][0] * t.x + rt[1][1] * t.y + rt[1][2] * t.z),
            -(rt[2][0] * t.x + rt[2][1] * t.y + rt[2][2] * t.z),
        );
        RigidTransform { rotation: rt, translation: ti }
    }

    /// Yaw angle if the rotation is a pure rotation about +z, else `None`.
    pub fn yaw(&self) -> Option<f64> {
        let r = &self.rotation;
        let upright = r[0][2].abs() <= ORTHONORMAL_TOL
            && r[1][2].abs() <= ORTHONORMAL_TOL
            && r[2][0].abs() <= ORTHONORMAL_TOL
            && r[2][1].abs() <= ORTHONORMAL_TOL
            && (r[2][2] - 1.0).abs() <= ORTHONORMAL_TOL;
        if upright {
            Some(r[1][0].atan2(r[0][0]))
        } else {
            None
        }
    }

    pub fn transform_points(&self, points: &[Point3]) -> PointSet {
        points.iter().map(|p| self.apply(p)).collect()
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = (a + std::f64::consts::PI).rem_euclid(two_pi);
    if r < 0.0 {
        r += two_pi;
    }
    r - std::f64::consts::PI
}
