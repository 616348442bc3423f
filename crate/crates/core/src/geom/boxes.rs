//! Upright (gravity-aligned) 3D boxes, box fitting, and overlap measures.

use serde::{Deserialize, Serialize};

use super::{wrap_angle, GeomError, Point3, RigidTransform};

/// Smallest dimension a fitted box reports. Guards against zero-thickness
/// boxes when a cluster happens to be collinear or coplanar.
const MIN_DIM: f64 = 0.01;

/// An upright 3D bounding box with 7 degrees of freedom: center, extents
/// and heading (rotation about +z, in `[-pi, pi)`).
///
/// `length` runs along the heading direction, `width` across it. When a
/// caller fixes the heading (e.g. along a flow direction) the length may
/// legitimately come out smaller than the width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box7 {
    pub center: Point3,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub heading: f64,
}

impl Box7 {
    pub fn new(
        center: Point3,
        length: f64,
        width: f64,
        height: f64,
        heading: f64,
    ) -> Result<Box7, GeomError> {
        if !(center.is_finite() && length.is_finite() && width.is_finite() && height.is_finite())
        {
            return Err(GeomError::InvalidBox("non-finite field".into()));
        }
        if length <= 0.0 || width <= 0.0 || height <= 0.0 {
            return Err(GeomError::InvalidBox(format!(
                "dimensions must be strictly positive, got {length} x {width} x {height}"
            )));
        }
        if !heading.is_finite() {
            return Err(GeomError::InvalidBox("non-finite heading".into()));
        }
        Ok(Box7 { center, length, width, height, heading: wrap_angle(heading) })
    }

    /// BEV footprint corners in counterclockwise order.
    pub fn corners_bev(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.heading.sin_cos();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        let u = [c * hl, s * hl];
        let v = [-s * hw, c * hw];
        let cx = self.center.x;
        let cy = self.center.y;
        [
            [cx + u[0] + v[0], cy + u[1] + v[1]],
            [cx - u[0] + v[0], cy - u[1] + v[1]],
            [cx - u[0] - v[0], cy - u[1] - v[1]],
            [cx + u[0] - v[0], cy + u[1] - v[1]],
        ]
    }

    pub fn bev_area(&self) -> f64 {
        self.length * self.width
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    pub fn z_interval(&self) -> (f64, f64) {
        (self.center.z - self.height / 2.0, self.center.z + self.height / 2.0)
    }

    /// Point containment with a symmetric tolerance on every face.
    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        let (s, c) = self.heading.sin_cos();
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let local_x = c * dx + s * dy;
        let local_y = -s * dx + c * dy;
        let dz = p.z - self.center.z;
        local_x.abs() <= self.length / 2.0 + tol
            && local_y.abs() <= self.width / 2.0 + tol
            && dz.abs() <= self.height / 2.0 + tol
    }

    /// As a 7-element array `[cx, cy, cz, l, w, h, heading]`.
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.center.x,
            self.center.y,
            self.center.z,
            self.length,
            self.width,
            self.height,
            self.heading,
        ]
    }

    pub fn from_array(a: &[f64; 7]) -> Result<Box7, GeomError> {
        Box7::new(Point3::new(a[0], a[1], a[2]), a[3], a[4], a[5], a[6])
    }
}

/// An axis-aligned BEV rectangle, `min` corner inclusive of `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BevRect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BevRect {
    /// Tight BEV bounds of a point set; `None` when empty.
    pub fn bounding(points: &[Point3]) -> Option<BevRect> {
        let first = points.first()?;
        let mut r = BevRect {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for p in &points[1..] {
            r.min_x = r.min_x.min(p.x);
            r.min_y = r.min_y.min(p.y);
            r.max_x = r.max_x.max(p.x);
            r.max_y = r.max_y.max(p.y);
        }
        Some(r)
    }

    pub fn expanded(&self, dx: f64, dy: f64) -> BevRect {
        BevRect {
            min_x: self.min_x - dx,
            min_y: self.min_y - dy,
            max_x: self.max_x + dx,
            max_y: self.max_y + dy,
        }
    }

    pub fn contains_xy(&self, p: &Point3) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn extent_x(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn extent_y(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// Fits the tightest upright box whose heading is fixed to `direction`
/// (a BEV vector). The box contains every input point; its area is minimal
/// among heading-constrained containing boxes because the extents are tight
/// in the rotated frame.
///
/// Errors on an empty cluster or a near-zero direction. Callers that want a
/// data-driven heading fall back to [`pca_major_direction`] on the latter.
pub fn min_area_box_along_direction(
    points: &[Point3],
    direction: (f64, f64),
) -> Result<Box7, GeomError> {
    if points.is_empty() {
        return Err(GeomError::EmptyPointSet);
    }
    let norm = (direction.0 * direction.0 + direction.1 * direction.1).sqrt();
    if !norm.is_finite() || norm <= 1e-9 {
        return Err(GeomError::DegenerateDirection);
    }
    let heading = direction.1.atan2(direction.0);
    let (s, c) = heading.sin_cos();

    let mut min_l = f64::INFINITY;
    let mut max_l = f64::NEG_INFINITY;
    let mut min_w = f64::INFINITY;
    let mut max_w = f64::NEG_INFINITY;
    let mut min_z = f64::INFINITY;
    let mut max_z = f64::NEG_INFINITY;
    for p in points {
        let along = c * p.x + s * p.y;
        let across = -s * p.x + c * p.y;
        min_l = min_l.min(along);
        max_l = max_l.max(along);
        min_w = min_w.min(across);
        max_w = max_w.max(across);
        min_z = min_z.min(p.z);
        max_z = max_z.max(p.z);
    }
    let mid_l = (min_l + max_l) / 2.0;
    let mid_w = (min_w + max_w) / 2.0;
    let center = Point3::new(
        c * mid_l - s * mid_w,
        s * mid_l + c * mid_w,
        (min_z + max_z) / 2.0,
    );
    Box7::new(
        center,
        (max_l - min_l).max(MIN_DIM),
        (max_w - min_w).max(MIN_DIM),
        (max_z - min_z).max(MIN_DIM),
        heading,
    )
}

/// BEV direction of largest point-spread (major eigenvector of the 2x2
/// covariance). Used as the heading fallback when a cluster's mean flow has
/// no usable BEV projection.
pub fn pca_major_direction(points: &[Point3]) -> Option<(f64, f64)> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p.x - mx;
        let dy = p.y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Major eigenvector of [[sxx, sxy], [sxy, syy]].
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let lambda = tr / 2.0 + (tr * tr / 4.0 - det).max(0.0).sqrt();
    let (vx, vy) = if sxy.abs() > 1e-12 {
        (lambda - syy, sxy)
    } else if sxx >= syy {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let norm = (vx * vx + vy * vy).sqrt();
    if norm <= 1e-12 {
        Some((1.0, 0.0))
    } else {
        Some((vx / norm, vy / norm))
    }
}

/// Applies a rigid transform to a box. The rotation must be a pure yaw —
/// an upright box cannot represent a tilted one — otherwise
/// [`GeomError::NonUprightTransform`] is returned.
pub fn transform_box(b: &Box7, t: &RigidTransform) -> Result<Box7, GeomError> {
    let yaw = t.yaw().ok_or(GeomError::NonUprightTransform)?;
    Box7::new(t.apply(&b.center), b.length, b.width, b.height, b.heading + yaw)
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % poly.len()];
        acc += x0 * y1 - x1 * y0;
    }
    acc.abs() / 2.0
}

/// Clips `subject` against the half-plane on the left of edge `a -> b`.
fn clip_edge(subject: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(subject.len() + 2);
    let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    for i in 0..subject.len() {
        let cur = subject[i];
        let prev = subject[(i + subject.len() - 1) % subject.len()];
        let sc = side(cur);
        let sp = side(prev);
        if sc >= 0.0 {
            if sp < 0.0 {
                out.push(intersect(prev, cur, a, b));
            }
            out.push(cur);
        } else if sp >= 0.0 {
            out.push(intersect(prev, cur, a, b));
        }
    }
    out
}

fn intersect(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d1 = [q[0] - p[0], q[1] - p[1]];
    let d2 = [b[0] - a[0], b[1] - a[1]];
    let denom = d1[0] * d2[1] - d1[1] * d2[0];
    if denom.abs() < 1e-18 {
        return q;
    }
    let t = ((a[0] - p[0]) * d2[1] - (a[1] - p[1]) * d2[0]) / denom;
    [p[0] + t * d1[0], p[1] + t * d1[1]]
}

/// Area of intersection of two convex counterclockwise polygons
/// (Sutherland–Hodgman clipping followed by the shoelace formula).
fn convex_intersection_area(a: &[[f64; 2]; 4], b: &[[f64; 2]; 4]) -> f64 {
    let mut poly: Vec<[f64; 2]> = a.to_vec();
    for i in 0..4 {
        if poly.is_empty() {
            return 0.0;
        }
        poly = clip_edge(&poly, b[i], b[(i + 1) % 4]);
    }
    polygon_area(&poly)
}

/// BEV (bird's-eye-view) intersection-over-union of two boxes' rotated
/// footprints. Symmetric, in `[0, 1]`.
pub fn bev_iou(a: &Box7, b: &Box7) -> f64 {
    let ca = a.corners_bev();
    let cb = b.corners_bev();
    let inter = convex_intersection_area(&ca, &cb)
        .min(a.bev_area())
        .min(b.bev_area());
    let union = a.bev_area() + b.bev_area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// 3D IoU of two upright boxes: BEV footprint intersection times the
/// overlap of the z intervals.
pub fn iou3d(a: &Box7, b: &Box7) -> f64 {
    let ca = a.corners_bev();
    let cb = b.corners_bev();
    let inter_bev = convex_intersection_area(&ca, &cb)
        .min(a.bev_area())
        .min(b.bev_area());
    let (a_lo, a_hi) = a.z_interval();
    let (b_lo, b_hi) = b.z_interval();
    let dz = (a_hi.min(b_hi) - a_lo.max(b_lo)).max(0.0);
    let inter = inter_bev * dz;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}
