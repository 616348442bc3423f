//! Auto labeling: turns per-frame flow fields into amodal box tracklets.
//!
//! Four stages, run per sequence:
//!
//! 1. [`propose_objects`] — spatio-temporal clustering of moving points
//!    into visible boxes, one set per frame;
//! 2. [`track_proposals`] — flow-advanced box association across frames
//!    (Hungarian matching on BEV IoU) into tracks;
//! 3. [`register_and_refine`] — sequential yaw-constrained ICP registration
//!    of each track's clusters into one aggregate shape, producing amodal
//!    boxes for every frame;
//! 4. [`export_labels`] — deterministic JSONL serialization.

mod icp;
mod proposal;
mod register;
mod track;

pub use icp::{median_nn_spacing, yaw_icp, IcpError};
pub use proposal::propose_objects;
pub use register::register_and_refine;
pub use track::track_proposals;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataError;
use crate::flow::FlowField;
use crate::geom::{Box7, Point3};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutolabelConfig {
    /// DBSCAN radius on point positions, meters.
    pub eps_p_m: f64,
    /// DBSCAN radius on flow vectors, meters per frame.
    pub eps_f: f64,
    /// Minimum speed for a point to join a proposal, m/s.
    pub f_min_mps: f64,
    /// BEV IoU below which a track-proposal pair cannot be matched.
    pub match_iou: f64,
    /// Consecutive unmatched frames before a track is terminated.
    pub max_misses: usize,
    /// Tracks observed in fewer frames than this are dropped.
    pub min_track_len: usize,
    pub icp: IcpSearchConfig,
}

impl Default for AutolabelConfig {
    fn default() -> Self {
        AutolabelConfig {
            eps_p_m: 1.0,
            eps_f: 0.1,
            f_min_mps: 1.0,
            match_iou: 0.1,
            max_misses: 2,
            min_track_len: 3,
            icp: IcpSearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcpSearchConfig {
    pub max_iters: usize,
    /// Convergence threshold on the change of the mean matched distance.
    pub tol: f64,
    /// Translation-initialization grid over the target box, "COLSxROWS".
    pub grid: String,
}

impl Default for IcpSearchConfig {
    fn default() -> Self {
        IcpSearchConfig { max_iters: 50, tol: 1e-6, grid: "5x5".into() }
    }
}

impl IcpSearchConfig {
    /// Parses the `grid` field; e.g. "5x5" -> (5, 5).
    pub fn grid_shape(&self) -> Result<(usize, usize), AutolabelError> {
        let bad = || AutolabelError::BadGrid(self.grid.clone());
        let (a, b) = self.grid.split_once('x').ok_or_else(bad)?;
        let nx: usize = a.trim().parse().map_err(|_| bad())?;
        let ny: usize = b.trim().parse().map_err(|_| bad())?;
        if nx == 0 || ny == 0 {
            return Err(bad());
        }
        Ok((nx, ny))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AutolabelError {
    #[error("invalid ICP grid spec {0:?}: expected \"COLSxROWS\", e.g. \"5x5\"")]
    BadGrid(String),
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
}

/// One frame's worth of clustered moving points with a fitted visible box.
#[derive(Debug, Clone)]
pub struct VisibleProposal {
    pub frame: usize,
    /// Indices into the frame's point array.
    pub indices: Vec<usize>,
    /// The clustered points, world frame.
    pub points: Vec<Point3>,
    /// Mean flow over the cluster, meters per frame.
    pub mean_flow: Point3,
    /// Tight box around `points`, heading along the BEV mean flow.
    pub box7: Box7,
}

/// One observation of a tracked object.
#[derive(Debug, Clone)]
pub struct TrackEntry {
    pub frame: usize,
    pub points: Vec<Point3>,
    pub visible: Box7,
    pub mean_flow: Point3,
    /// Amodal box after registration; `None` until then, or when every
    /// ICP initialization failed for this frame.
    pub amodal: Option<Box7>,
}

impl TrackEntry {
    /// The box that represents this observation: amodal when registration
    /// succeeded, the visible box otherwise.
    pub fn best_box(&self) -> &Box7 {
        self.amodal.as_ref().unwrap_or(&self.visible)
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    /// Observations with strictly increasing frame indices.
    pub entries: Vec<TrackEntry>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Runs proposals, tracking, and registration over a whole sequence.
///
/// `frames_world` are the per-frame points in the world frame; `flows[t]`
/// maps frame `t` to `t+1`, so the last frame contributes no proposals.
pub fn run_autolabel(
    frames_world: &[Vec<Point3>],
    flows: &[FlowField],
    dt: f64,
    cfg: &AutolabelConfig,
) -> Result<Vec<Track>, AutolabelError> {
    assert!(
        flows.len() + 1 == frames_world.len() || flows.len() == frames_world.len(),
        "expected one flow field per frame transition"
    );
    let proposals: Vec<Vec<VisibleProposal>> = frames_world
        .par_iter()
        .zip(flows.par_iter())
        .enumerate()
        .map(|(t, (pts, flow))| propose_objects(t, pts, &flow.flows, dt, cfg))
        .collect();

    let mut tracks = track_proposals(&proposals, frames_world, flows, cfg);
    let shapes = tracks
        .par_iter()
        .map(|t| register_and_refine(t, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    for (track, refined) in tracks.iter_mut().zip(shapes) {
        for (entry, amodal) in track.entries.iter_mut().zip(refined) {
            entry.amodal = amodal;
        }
    }
    Ok(tracks)
}

/// Serialized label row. `box` is `[cx, cy, cz, l, w, h, heading]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRow {
    pub frame: usize,
    pub track_id: u64,
    #[serde(rename = "box")]
    pub box7: [f64; 7],
    pub source: LabelSource,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Visible,
    Amodal,
}

/// Flattens tracks into export rows, sorted by (frame, track id).
pub fn label_rows(tracks: &[Track]) -> Vec<LabelRow> {
    let mut rows: Vec<LabelRow> = tracks
        .iter()
        .flat_map(|t| {
            t.entries.iter().map(move |e| {
                let (source, flags) = match &e.amodal {
                    Some(_) => (LabelSource::Amodal, Vec::new()),
                    None => (LabelSource::Visible, vec!["unregistered".to_string()]),
                };
                LabelRow {
                    frame: e.frame,
                    track_id: t.id,
                    box7: e.best_box().to_array(),
                    source,
                    flags,
                }
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.frame, r.track_id));
    rows
}

/// Writes labels as JSONL with a leading comment line.
pub fn export_labels(path: &Path, tracks: &[Track]) -> Result<(), DataError> {
    let io = |source| DataError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "# auto labels: one JSON row per (frame, track)").map_err(io)?;
    for row in label_rows(tracks) {
        let line = serde_json::to_string(&row).expect("label rows serialize");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a label file produced by [`export_labels`].
pub fn import_labels(path: &Path) -> Result<Vec<LabelRow>, DataError> {
    let io = |source| DataError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: LabelRow = serde_json::from_str(trimmed).map_err(|e| DataError::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}
