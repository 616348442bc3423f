//! Flow-aware multi-object tracking over per-frame box proposals.
//!
//! Live boxes are advanced into the next frame by the mean flow of the
//! points they contain (falling back to a constant-velocity Kalman estimate
//! when no flowing points are available, e.g. during occlusion), then
//! associated to new proposals with an optimal assignment on BEV overlap.

use crate::flow::{FlowField, PointStatus};
use crate::geom::{bev_iou, Box7, Point3};

use super::{AutolabelConfig, Track, TrackEntry, VisibleProposal};

/// Cost for pairs whose overlap falls below the association gate. Large but
/// finite — the assignment solver does arithmetic on costs — and any pair
/// at this cost is discarded after the solve.
const FORBIDDEN: f64 = 1e6;
/// Cost of assigning a real row/column to a padding one. Above the largest
/// admissible real cost (1.0) so padding never steals a gated match.
const PAD: f64 = 1.0;

/// Blend factor for the smoothed box geometry: new observations get this
/// weight, history the rest.
const SMOOTH: f64 = 0.5;
/// Kalman constants, in meters (per frame for velocities).
const INIT_VAR: f64 = 0.25;
const PROCESS_VAR: f64 = 0.01;
const MEAS_VAR: f64 = 0.01;
/// Containment slack when collecting a box's points for flow advancement;
/// fitted boxes touch their extreme points exactly.
const CONTAIN_TOL: f64 = 1e-6;

/// Constant-velocity Kalman filter over BEV position, state
/// `[x, y, vx, vy]` with velocities in meters per frame.
struct Kalman {
    x: [f64; 4],
    p: [[f64; 4]; 4],
}

impl Kalman {
    fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        let mut p = [[0.0; 4]; 4];
        for (i, row) in p.iter_mut().enumerate() {
            row[i] = INIT_VAR;
        }
        Kalman { x: [x, y, vx, vy], p }
    }

    fn velocity(&self) -> (f64, f64) {
        (self.x[2], self.x[3])
    }

    /// Advances one frame: `x += v`, covariance through the transition
    /// plus process noise.
    fn predict(&mut self) {
        self.x[0] += self.x[2];
        self.x[1] += self.x[3];
        let p = self.p;
        // F P with F = [[I, I], [0, I]] in 2x2 blocks ...
        let mut fp = [[0.0; 4]; 4];
        for j in 0..4 {
            fp[0][j] = p[0][j] + p[2][j];
            fp[1][j] = p[1][j] + p[3][j];
            fp[2][j] = p[2][j];
            fp[3][j] = p[3][j];
        }
        // ... then (F P) Fᵀ + Q.
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            out[i][0] = fp[i][0] + fp[i][2];
            out[i][1] = fp[i][1] + fp[i][3];
            out[i][2] = fp[i][2];
            out[i][3] = fp[i][3];
        }
        for (i, row) in out.iter_mut().enumerate() {
            row[i] += PROCESS_VAR;
        }
        self.p = out;
    }

    /// Measurement update with an observed BEV center.
    fn update(&mut self, zx: f64, zy: f64) {
        let p = self.p;
        // Innovation covariance S = H P Hᵀ + R; H selects (x, y).
        let s = [[p[0][0] + MEAS_VAR, p[0][1]], [p[1][0], p[1][1] + MEAS_VAR]];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let si = [
            [s[1][1] / det, -s[0][1] / det],
            [-s[1][0] / det, s[0][0] / det],
        ];
        // Gain K = P Hᵀ S⁻¹ (4x2).
        let mut k = [[0.0; 2]; 4];
        for i in 0..4 {
            for j in 0..2 {
                k[i][j] = p[i][0] * si[0][j] + p[i][1] * si[1][j];
            }
        }
        let rx = zx - self.x[0];
        let ry = zy - self.x[1];
        for i in 0..4 {
            self.x[i] += k[i][0] * rx + k[i][1] * ry;
        }
        // P = (I - K H) P.
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = p[i][j] - k[i][0] * p[0][j] - k[i][1] * p[1][j];
            }
        }
        self.p = out;
    }
}

struct LiveTrack {
    /// Global creation counter; final ids are assigned in this order.
    created: usize,
    entries: Vec<TrackEntry>,
    kalman: Kalman,
    /// Smoothed geometry carried across frames so a single clipped
    /// observation does not shrink the association box.
    dims: [f64; 3],
    z: f64,
    heading: f64,
    /// Box the track is expected to occupy in the frame being matched.
    bbox: Box7,
    /// Frame and point indices of the most recent matched observation.
    last_frame: usize,
    last_indices: Vec<usize>,
    misses: usize,
}

impl LiveTrack {
    fn spawn(created: usize, prop: &VisibleProposal) -> Self {
        let b = prop.box7;
        LiveTrack {
            created,
            entries: vec![entry_from(prop)],
            kalman: Kalman::new(b.center.x, b.center.y, prop.mean_flow.x, prop.mean_flow.y),
            dims: [b.length, b.width, b.height],
            z: b.center.z,
            heading: b.heading,
            bbox: b,
            last_frame: prop.frame,
            last_indices: prop.indices.clone(),
            misses: 0,
        }
    }

    /// Moves the expected box into frame `t` using the mean flow of its
    /// own points. Freshly observed tracks use the exact cluster members
    /// from the previous frame — box containment would also sweep up
    /// bystander points when two objects pass close — while tracks coasting
    /// through a miss fall back to containment, then to Kalman velocity.
    fn advance(&mut self, t: usize, prev_points: &[Point3], prev_flow: &FlowField) {
        self.kalman.predict();
        let mut sum = Point3::ZERO;
        let mut n = 0usize;
        if self.last_frame + 1 == t {
            for &i in &self.last_indices {
                sum += prev_flow.flows[i];
                n += 1;
            }
        } else {
            for (i, p) in prev_points.iter().enumerate() {
                if prev_flow.status[i] == PointStatus::Dynamic
                    && self.bbox.contains(p, CONTAIN_TOL)
                {
                    sum += prev_flow.flows[i];
                    n += 1;
                }
            }
        }
        let step = if n > 0 {
            sum * (1.0 / n as f64)
        } else {
            let (vx, vy) = self.kalman.velocity();
            Point3::new(vx, vy, 0.0)
        };
        let center =
            Point3::new(self.bbox.center.x + step.x, self.bbox.center.y + step.y, self.z);
        self.bbox = Box7::new(center, self.dims[0], self.dims[1], self.dims[2], self.heading)
            .expect("smoothed dims stay positive");
    }

    /// Folds a matched proposal into the track state.
    fn observe(&mut self, prop: &VisibleProposal) {
        let b = &prop.box7;
        self.kalman.update(b.center.x, b.center.y);
        for (d, obs) in self.dims.iter_mut().zip([b.length, b.width, b.height]) {
            *d = SMOOTH * obs + (1.0 - SMOOTH) * *d;
        }
        self.z = SMOOTH * b.center.z + (1.0 - SMOOTH) * self.z;
        // Blend headings on the unit circle so the wrap at ±pi is harmless.
        let (s0, c0) = self.heading.sin_cos();
        let (s1, c1) = b.heading.sin_cos();
        self.heading = (SMOOTH * s1 + (1.0 - SMOOTH) * s0)
            .atan2(SMOOTH * c1 + (1.0 - SMOOTH) * c0);
        self.bbox =
            Box7::new(b.center, self.dims[0], self.dims[1], self.dims[2], self.heading)
                .expect("smoothed dims stay positive");
        self.last_frame = prop.frame;
        self.last_indices = prop.indices.clone();
        self.misses = 0;
        self.entries.push(entry_from(prop));
    }
}

fn entry_from(prop: &VisibleProposal) -> TrackEntry {
    TrackEntry {
        frame: prop.frame,
        points: prop.points.clone(),
        visible: prop.box7,
        mean_flow: prop.mean_flow,
        amodal: None,
    }
}

/// Optimal assignment for a square cost matrix (Kuhn–Munkres with
/// potentials, O(n³)). Returns the column assigned to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-indexed with a sentinel column 0, the classic formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Links per-frame proposals into tracks.
///
/// A track that goes unmatched for more than `max_misses` consecutive
/// frames is terminated; tracks shorter than `min_track_len` observations
/// are dropped. Surviving tracks get ids `0..` in creation order.
pub fn track_proposals(
    proposals: &[Vec<VisibleProposal>],
    frames_world: &[Vec<Point3>],
    flows: &[FlowField],
    cfg: &AutolabelConfig,
) -> Vec<Track> {
    let mut live: Vec<LiveTrack> = Vec::new();
    let mut finished: Vec<LiveTrack> = Vec::new();
    let mut created = 0usize;

    for (t, props) in proposals.iter().enumerate() {
        if t > 0 {
            for tr in &mut live {
                tr.advance(t, &frames_world[t - 1], &flows[t - 1]);
            }
        }

        // Gated assignment between live tracks (rows) and proposals
        // (columns), padded square so leftovers land on padding.
        let nl = live.len();
        let np = props.len();
        let n = nl.max(np);
        let mut chosen: Vec<Option<usize>> = vec![None; nl];
        let mut claimed = vec![false; np];
        if n > 0 && nl > 0 && np > 0 {
            let mut cost = vec![vec![PAD; n]; n];
            for (i, tr) in live.iter().enumerate() {
                for (j, prop) in props.iter().enumerate() {
                    let iou = bev_iou(&tr.bbox, &prop.box7);
                    cost[i][j] = if iou >= cfg.match_iou { 1.0 - iou } else { FORBIDDEN };
                }
            }
            for (i, j) in hungarian(&cost).into_iter().enumerate() {
                if i < nl && j < np && cost[i][j] < FORBIDDEN {
                    chosen[i] = Some(j);
                    claimed[j] = true;
                }
            }
        }

        let mut next_live = Vec::with_capacity(nl + np);
        for (i, mut tr) in live.into_iter().enumerate() {
            match chosen[i] {
                Some(j) => {
                    tr.observe(&props[j]);
                    next_live.push(tr);
                }
                None => {
                    tr.misses += 1;
                    if tr.misses > cfg.max_misses {
                        finished.push(tr);
                    } else {
                        next_live.push(tr);
                    }
                }
            }
        }
        for (j, prop) in props.iter().enumerate() {
            if !claimed[j] {
                next_live.push(LiveTrack::spawn(created, prop));
                created += 1;
            }
        }
        live = next_live;
    }
    finished.extend(live);

    finished.retain(|tr| tr.entries.len() >= cfg.min_track_len);
    finished.sort_by_key(|tr| tr.created);
    finished
        .into_iter()
        .enumerate()
        .map(|(id, tr)| Track { id: id as u64, entries: tr.entries })
        .collect()
}
