//! Scene-flow estimation by runtime optimization.
//!
//! Dynamic points are decomposed into spatial clusters; each cluster gets a
//! freshly initialized pair of coordinate networks (forward and backward)
//! whose parameters are optimized against a bidirectional Chamfer loss with
//! a local-consistency regularizer. Only the forward flow is kept. The
//! matching target for a cluster comes from an expanded BEV box query into
//! the next frame's dynamic points, pruned back to the cluster's size.

mod net;
mod optim;

pub use net::{Mlp, Nonlinearity};
pub use optim::{
    cluster_loss, cluster_loss_and_grad, optimize_cluster_flow, ClusterFlag, ClusterOutcome,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{centroid, dbscan, dist2, BevRect, Point3};
use crate::preprocess::{MotionMask, PointClass};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// DBSCAN radius for scene decomposition, meters.
    pub eps_p_m: f64,
    /// DBSCAN core-point threshold.
    pub min_pts: usize,
    /// Largest BEV buffer when expanding a cluster's box query, meters.
    pub delta_max_m: f64,
    /// Weight of the local-consistency regularizer.
    pub alpha: f64,
    pub net: NetConfig,
    pub opt: OptConfig,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            eps_p_m: 1.0,
            min_pts: 5,
            delta_max_m: 2.5,
            alpha: 0.1,
            net: NetConfig::default(),
            opt: OptConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub layers: usize,
    pub width: usize,
    pub nonlinearity: Nonlinearity,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { layers: 4, width: 64, nonlinearity: Nonlinearity::Tanh }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptConfig {
    pub step: f64,
    pub max_iters: usize,
    /// Iterations without a 1e-6 loss improvement before stopping early.
    pub patience: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig { step: 8e-3, max_iters: 500, patience: 30 }
    }
}

/// Per-point motion status carried alongside flow vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Ground,
    Static,
    Dynamic,
    /// Dynamic candidate that fell outside every cluster.
    Noise,
}

impl PointStatus {
    pub fn to_byte(self) -> u8 {
        match self {
            PointStatus::Ground => 0,
            PointStatus::Static => 1,
            PointStatus::Dynamic => 2,
            PointStatus::Noise => 3,
        }
    }

    pub fn from_byte(b: u8) -> Option<PointStatus> {
        match b {
            0 => Some(PointStatus::Ground),
            1 => Some(PointStatus::Static),
            2 => Some(PointStatus::Dynamic),
            3 => Some(PointStatus::Noise),
            _ => None,
        }
    }
}

/// Per-point flow for one frame, aligned with the frame's point indices.
/// Flow is exactly zero wherever the status is not `Dynamic`.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub flows: Vec<Point3>,
    pub status: Vec<PointStatus>,
}

impl FlowField {
    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }
}

/// Matching target for one cluster: the expanded box query into the next
/// frame's dynamic points, pruned to the cluster's size.
#[derive(Debug, Clone)]
pub struct ClusterTarget {
    /// Expanded BEV rectangle used for the query.
    pub query_rect: BevRect,
    /// All next-frame dynamic indices inside the rectangle, pre-pruning.
    pub omega: Vec<usize>,
    /// The `n = min(|omega|, |cluster|)` retained indices.
    pub kept: Vec<usize>,
    /// Retained points, in `kept` order.
    pub points: Vec<Point3>,
}

/// Summary of a single cluster's optimization, for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterReport {
    pub n_points: usize,
    /// Lowest frame point index in the cluster; stable cluster identity.
    pub min_index: usize,
    pub flag: ClusterFlag,
    pub final_loss: f64,
    pub iters: usize,
}

/// A frame's flow field plus per-cluster diagnostics.
#[derive(Debug, Clone)]
pub struct FrameFlow {
    pub field: FlowField,
    pub clusters: Vec<ClusterReport>,
}

/// Splits the dynamic points into connected components. Returns index
/// lists into `dynamic`; points in no cluster are noise.
pub fn decompose_scene(dynamic: &[Point3], eps_p: f64, min_pts: usize) -> Vec<Vec<usize>> {
    let labels = dbscan(dynamic, eps_p, min_pts);
    crate::geom::clusters_from_labels(&labels)
}

/// Builds the matching target for `cluster` from the next frame's dynamic
/// points.
///
/// The tight BEV box of the cluster is expanded by buffers proportional to
/// its aspect ratio, with the larger buffer pinned at `delta_max`; the
/// retrieved points are then pruned to the `min(|omega|, |cluster|)`
/// nearest to the cluster centroid (ties broken by lower index).
pub fn box_query(cluster: &[Point3], next_dynamic: &[Point3], delta_max: f64) -> ClusterTarget {
    let rect = BevRect::bounding(cluster).expect("box_query needs a non-empty cluster");
    let (ex, ey) = (rect.extent_x(), rect.extent_y());
    let (dx, dy) = if ex <= 0.0 && ey <= 0.0 {
        (delta_max, delta_max)
    } else if ex >= ey {
        (delta_max, delta_max * ey / ex)
    } else {
        (delta_max * ex / ey, delta_max)
    };
    let query_rect = rect.expanded(dx, dy);

    let omega: Vec<usize> = next_dynamic
        .iter()
        .enumerate()
        .filter(|(_, p)| query_rect.contains_xy(p))
        .map(|(i, _)| i)
        .collect();

    let c = centroid(cluster).expect("non-empty cluster");
    let n = omega.len().min(cluster.len());
    let mut ranked: Vec<usize> = omega.clone();
    ranked.sort_by(|a, b| {
        let da = dist2(&next_dynamic[*a], &c);
        let db = dist2(&next_dynamic[*b], &c);
        da.partial_cmp(&db).expect("finite distances").then(a.cmp(b))
    });
    ranked.truncate(n);
    let points = ranked.iter().map(|i| next_dynamic[*i]).collect();
    ClusterTarget { query_rect, omega, kept: ranked, points }
}

/// Estimates flow for every point of frame `t` against frame `t+1`.
///
/// Ground, static, and unclustered (noise) points get exactly zero flow;
/// each cluster is solved independently, in parallel, and the results are
/// assembled in cluster order so the output is deterministic.
pub fn estimate_frame_flow(
    world_t: &[Point3],
    mask_t: &MotionMask,
    world_t1: &[Point3],
    mask_t1: &MotionMask,
    cfg: &FlowConfig,
    seed: u64,
    frame_index: usize,
) -> FrameFlow {
    assert_eq!(world_t.len(), mask_t.labels.len(), "mask misaligned with frame t");
    assert_eq!(world_t1.len(), mask_t1.labels.len(), "mask misaligned with frame t+1");

    let dyn_idx: Vec<usize> = mask_t.dynamic_indices();
    let dyn_pts: Vec<Point3> = dyn_idx.iter().map(|i| world_t[*i]).collect();
    let next_dyn: Vec<Point3> = world_t1
        .iter()
        .zip(&mask_t1.labels)
        .filter(|(_, c)| **c == PointClass::Dynamic)
        .map(|(p, _)| *p)
        .collect();

    let clusters = decompose_scene(&dyn_pts, cfg.eps_p_m, cfg.min_pts);

    let mut status: Vec<PointStatus> = mask_t
        .labels
        .iter()
        .map(|c| match c {
            PointClass::Ground => PointStatus::Ground,
            PointClass::Static => PointStatus::Static,
            PointClass::Dynamic => PointStatus::Noise, // promoted below if clustered
        })
        .collect();
    let mut flows = vec![Point3::ZERO; world_t.len()];

    let frame_seed = crate::mix_seed(seed, frame_index as u64);
    let solved: Vec<(Vec<Point3>, ClusterOutcome)> = clusters
        .par_iter()
        .map(|members| {
            let src: Vec<Point3> = members.iter().map(|i| dyn_pts[*i]).collect();
            let min_frame_idx = members.iter().map(|i| dyn_idx[*i]).min().expect("non-empty");
            let target = box_query(&src, &next_dyn, cfg.delta_max_m);
            let outcome = optimize_cluster_flow(
                &src,
                &target.points,
                cfg,
                crate::mix_seed(frame_seed, min_frame_idx as u64),
            );
            (src, outcome)
        })
        .collect();

    let mut reports = Vec::with_capacity(clusters.len());
    for (members, (src, outcome)) in clusters.iter().zip(solved) {
        let min_index = members.iter().map(|i| dyn_idx[*i]).min().expect("non-empty");
        for (local, member) in members.iter().enumerate() {
            let frame_i = dyn_idx[*member];
            status[frame_i] = PointStatus::Dynamic;
            flows[frame_i] = outcome.flows[local];
        }
        reports.push(ClusterReport {
            n_points: src.len(),
            min_index,
            flag: outcome.flag,
            final_loss: outcome.final_loss,
            iters: outcome.iters,
        });
    }

    FrameFlow { field: FlowField { flows, status }, clusters: reports }
}
