//! Sequential shape registration and amodal box refinement.
//!
//! A tracked object is observed as partial clusters, one per frame. The
//! densest observation is chosen as the registration target; every other
//! frame is aligned onto it with yaw-constrained ICP (multiple grid
//! initializations, best final error wins) and merged, so the target
//! accumulates the union of all views. One tight box is fitted to the
//! aggregate and carried back into each frame through the inverse of its
//! registration transform.

use std::cmp::Reverse;

use crate::geom::{
    centroid, min_area_box_along_direction, transform_box, Box7, Point3, RigidTransform,
};

use super::icp::{median_nn_spacing, yaw_icp};
use super::{AutolabelConfig, AutolabelError, Track};

/// Outcome of aligning every frame of a track onto its target frame.
struct Registration {
    /// Per-frame transform into the centered target frame; `None` when
    /// every initialization failed to find enough overlap.
    transforms: Vec<Option<RigidTransform>>,
    target_idx: usize,
    /// Union of all registered clusters, centered on the target centroid.
    aggregate: Vec<Point3>,
    /// Per-frame cluster centroids (the centering offsets).
    centroids: Vec<Point3>,
}

/// `n` evenly spaced offsets spanning `[-half, half]`; just the midpoint
/// when `n == 1`.
fn grid_strides(half: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n).map(|k| -half + 2.0 * half * k as f64 / (n - 1) as f64).collect()
}

fn register_track(track: &Track, nx: usize, ny: usize, cfg: &AutolabelConfig) -> Registration {
    let l = track.len();
    let centroids: Vec<Point3> = track
        .entries
        .iter()
        .map(|e| centroid(&e.points).expect("track entries hold non-empty clusters"))
        .collect();
    let centered: Vec<Vec<Point3>> = track
        .entries
        .iter()
        .zip(&centroids)
        .map(|(e, c)| e.points.iter().map(|p| *p - *c).collect())
        .collect();

    // Densest observation anchors the registration (ties: earliest frame).
    let target_idx = (0..l)
        .max_by_key(|&i| (track.entries[i].points.len(), Reverse(i)))
        .expect("non-empty track");
    let theta_tgt = track.entries[target_idx].visible.heading;
    let (cos_t, sin_t) = (theta_tgt.cos(), theta_tgt.sin());

    let mut aggregate = centered[target_idx].clone();
    let mut transforms: Vec<Option<RigidTransform>> = vec![None; l];
    transforms[target_idx] = Some(RigidTransform::identity());

    // Correspondence cap from the clean target view's sampling density.
    // The merged aggregate is the wrong source for this: each merge stacks
    // near-duplicates of already-present surface points, so its median
    // spacing collapses and would starve later frames of correspondences.
    let cap = 2.0 * median_nn_spacing(&aggregate);

    // Frames after the target first (temporal order), then the earlier
    // frames walking backwards, so each source faces the richest aggregate
    // available by the time it is registered.
    let order = (target_idx + 1..l).chain((0..target_idx).rev());
    for i in order {
        let rot = theta_tgt - track.entries[i].visible.heading;
        let mut best: Option<(RigidTransform, f64)> = None;
        if cap > 0.0 {
            // Initial translations tile the bounding box of the shape
            // assembled so far: a grid of offsets along the box axes,
            // centered on its middle. This starts as the target cluster's
            // own box and widens as merged views extend the shape, so a
            // partial view can land anywhere on the full object.
            let agg_box = min_area_box_along_direction(&aggregate, (cos_t, sin_t))
                .expect("aggregate holds the non-empty target cluster");
            let strides_x = grid_strides(agg_box.length / 2.0, nx);
            let strides_y = grid_strides(agg_box.width / 2.0, ny);
            for &sx in &strides_x {
                for &sy in &strides_y {
                    let off = Point3::new(
                        agg_box.center.x + cos_t * sx - sin_t * sy,
                        agg_box.center.y + sin_t * sx + cos_t * sy,
                        0.0,
                    );
                    let init = RigidTransform::from_yaw_translation(rot, off);
                    if let Ok((t, eps)) = yaw_icp(
                        &centered[i],
                        &aggregate,
                        &init,
                        cfg.icp.max_iters,
                        cfg.icp.tol,
                        cap,
                    ) {
                        if best.as_ref().map_or(true, |(_, b)| eps < *b) {
                            best = Some((t, eps));
                        }
                    }
                }
            }
        }
        match best {
            Some((t, _)) => {
                aggregate.extend(centered[i].iter().map(|p| t.apply(p)));
                transforms[i] = Some(t);
            }
            None => log::warn!(
                "frame {}: no ICP initialization found enough overlap; \
                 keeping the visible box",
                track.entries[i].frame
            ),
        }
    }
    Registration { transforms, target_idx, aggregate, centroids }
}

/// Registers a track's clusters and returns one amodal box per entry.
///
/// `None` marks frames where every initialization failed; callers keep the
/// visible box there. All other frames receive the same aggregate-shape
/// box, expressed in their own frame via the inverse registration
/// transform, so dimensions agree across the whole track.
pub fn register_and_refine(
    track: &Track,
    cfg: &AutolabelConfig,
) -> Result<Vec<Option<Box7>>, AutolabelError> {
    if track.is_empty() {
        return Ok(Vec::new());
    }
    let (nx, ny) = cfg.icp.grid_shape()?;
    let reg = register_track(track, nx, ny, cfg);

    let c_tgt = reg.centroids[reg.target_idx];
    let world: Vec<Point3> = reg.aggregate.iter().map(|p| *p + c_tgt).collect();
    let theta = track.entries[reg.target_idx].visible.heading;
    let refined = min_area_box_along_direction(&world, (theta.cos(), theta.sin()))?;

    let mut out: Vec<Option<Box7>> = vec![None; track.len()];
    for (i, t) in reg.transforms.iter().enumerate() {
        let Some(t) = t else { continue };
        if i == reg.target_idx {
            out[i] = Some(refined);
            continue;
        }
        // World target frame -> centered target -> centered source ->
        // world source frame.
        let to_frame = RigidTransform::from_translation(reg.centroids[i])
            .compose(&t.inverse())
            .compose(&RigidTransform::from_translation(-c_tgt));
        out[i] = Some(transform_box(&refined, &to_frame)?);
    }
    Ok(out)
}
