//! Object proposals by spatio-temporal clustering: points must agree both
//! in position and in motion to form one proposal, which splits abutting
//! objects that move differently and discards inconsistent flow noise.

use std::collections::BTreeMap;

use super::{AutolabelConfig, VisibleProposal};
use crate::geom::{
    centroid, dbscan, min_area_box_along_direction, pca_major_direction, Box7, GeomError, Point3,
};

/// Core-point threshold for both proposal DBSCAN passes. Smaller clusters
/// cannot support a meaningful box fit.
const PROPOSAL_MIN_PTS: usize = 5;

/// Fits a tight box around `points` headed along the BEV mean flow,
/// falling back to the principal axis (then to +x) when the flow has no
/// BEV direction to offer.
fn fit_visible_box(points: &[Point3], mean_flow: &Point3) -> Result<Box7, GeomError> {
    match min_area_box_along_direction(points, (mean_flow.x, mean_flow.y)) {
        Err(GeomError::DegenerateDirection) => {
            let dir = pca_major_direction(points).unwrap_or((1.0, 0.0));
            min_area_box_along_direction(points, dir)
        }
        other => other,
    }
}

/// Clusters one frame's moving points into visible-box proposals.
///
/// Points slower than `f_min_mps` are dropped; the survivors are clustered
/// independently by position (radius `eps_p_m`) and by flow vector (radius
/// `eps_f`, meters per frame), and every nonempty intersection of a
/// position cluster with a flow cluster becomes a proposal. Points that
/// land in no cluster of either pass are discarded as noise.
pub fn propose_objects(
    frame: usize,
    points: &[Point3],
    flows: &[Point3],
    dt: f64,
    cfg: &AutolabelConfig,
) -> Vec<VisibleProposal> {
    assert_eq!(points.len(), flows.len(), "flows misaligned with points");
    let min_disp = cfg.f_min_mps * dt;
    let moving: Vec<usize> =
        (0..points.len()).filter(|i| flows[*i].norm() >= min_disp).collect();
    if moving.is_empty() {
        return Vec::new();
    }

    let pos: Vec<Point3> = moving.iter().map(|i| points[*i]).collect();
    let vel: Vec<Point3> = moving.iter().map(|i| flows[*i]).collect();
    let by_pos = dbscan(&pos, cfg.eps_p_m, PROPOSAL_MIN_PTS);
    let by_flow = dbscan(&vel, cfg.eps_f, PROPOSAL_MIN_PTS);

    // Pairwise intersections, keyed (position cluster, flow cluster) so the
    // output order is deterministic.
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (local, frame_idx) in moving.iter().enumerate() {
        if let (Some(pi), Some(fj)) = (by_pos[local], by_flow[local]) {
            groups.entry((pi, fj)).or_default().push(*frame_idx);
        }
    }

    let mut proposals = Vec::with_capacity(groups.len());
    for indices in groups.into_values() {
        let cluster: Vec<Point3> = indices.iter().map(|i| points[*i]).collect();
        let cluster_flows: Vec<Point3> = indices.iter().map(|i| flows[*i]).collect();
        let mean_flow = centroid(&cluster_flows).expect("nonempty intersection");
        let box7 = match fit_visible_box(&cluster, &mean_flow) {
            Ok(b) => b,
            Err(err) => {
                log::warn!("frame {frame}: dropping degenerate proposal: {err}");
                continue;
            }
        };
        proposals.push(VisibleProposal { frame, indices, points: cluster, mean_flow, box7 });
    }
    proposals
}
