//! Sequence data model and on-disk formats.
//!
//! A sequence directory looks like:
//!
//! ```text
//! seq/
//!   meta.json          {"id": "...", "hz": 10.0}
//!   poses.jsonl        one pose row per frame (sensor-to-world)
//!   frame_000000.pts   little-endian f32 x,y,z triples, sensor frame
//!   frame_000001.pts
//!   gt.jsonl           optional ground-truth rows (world frame)
//! ```
//!
//! Points are stored in the sensor frame as `f32`; all in-memory math runs
//! in `f64`. Ground-truth flow vectors are world-frame displacements over
//! one frame interval, aligned by index with the frame's point file.

pub mod generate;

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Box7, GeomError, Point3, PointSet, RigidTransform};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("{path} line {line}: {reason}")]
    MalformedLine { path: PathBuf, line: usize, reason: String },
    #[error("frame {frame}: missing pose row")]
    MissingPose { frame: usize },
    #[error("frame {frame}: timestamp does not increase over frame {}", frame - 1)]
    NonMonotoneTimestamps { frame: usize },
    #[error("geometry: {0}")]
    Geom(#[from] GeomError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// A single LiDAR scan with its timestamp and sensor-to-world pose.
#[derive(Debug, Clone)]
pub struct Frame {
    pub index: usize,
    pub timestamp_s: f64,
    /// Points in the sensor frame, order stable.
    pub points: PointSet,
    /// Sensor-to-world transform.
    pub pose: RigidTransform,
}

impl Frame {
    /// Points transformed into the world frame.
    pub fn to_world(&self) -> PointSet {
        self.pose.transform_points(&self.points)
    }
}

/// An ordered run of frames sharing a world frame.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub id: String,
    pub hz: f64,
    pub frames: Vec<Frame>,
}

impl Sequence {
    /// Nominal frame interval in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.hz
    }

    /// Actual interval between frame `i` and `i + 1`.
    pub fn frame_dt(&self, i: usize) -> f64 {
        self.frames[i + 1].timestamp_s - self.frames[i].timestamp_s
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// One ground-truth object observation in one frame.
#[derive(Debug, Clone)]
pub struct GtObject {
    pub frame: usize,
    pub track_id: u64,
    /// Amodal box in the world frame.
    pub box7: Box7,
    /// Nominal object speed (magnitude of the body velocity).
    pub speed_mps: f64,
    /// World-frame flow (meters per frame interval) for this object's
    /// points, keyed by index into the frame's point array. Empty for the
    /// last frame of a sequence.
    pub point_flows: Vec<(usize, Point3)>,
}

/// Ground truth for a sequence: per-frame object boxes plus per-point flow.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    /// Sorted by `(frame, track_id)`.
    pub objects: Vec<GtObject>,
}

impl GroundTruth {
    pub fn frame_objects(&self, frame: usize) -> impl Iterator<Item = &GtObject> {
        self.objects.iter().filter(move |o| o.frame == frame)
    }

    /// Dense per-point flow for a frame: zero for background, the rigid
    /// displacement for object points.
    pub fn frame_flows(&self, frame: usize, n_points: usize) -> Vec<Point3> {
        let mut flows = vec![Point3::ZERO; n_points];
        for obj in self.frame_objects(frame) {
            for (idx, f) in &obj.point_flows {
                if *idx < n_points {
                    flows[*idx] = *f;
                }
            }
        }
        flows
    }

    /// Dense per-point speed in m/s derived from the flow rows.
    pub fn frame_point_speeds(&self, frame: usize, n_points: usize, dt: f64) -> Vec<f64> {
        self.frame_flows(frame, n_points)
            .iter()
            .map(|f| f.norm() / dt)
            .collect()
    }

    pub fn track_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.objects.iter().map(|o| o.track_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    id: String,
    hz: f64,
}

#[derive(Serialize, Deserialize)]
struct PoseRow {
    index: usize,
    timestamp_s: f64,
    /// Row-major 3x3 rotation.
    rotation: Vec<f64>,
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct GtRow {
    frame: usize,
    track_id: u64,
    /// `[cx, cy, cz, l, w, h, heading]`
    #[serde(rename = "box")]
    box7: [f64; 7],
    speed_mps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    point_flows: Option<Vec<(usize, f64, f64, f64)>>,
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.pts")
}

/// Writes a sequence (and optional ground truth) into `dir`, creating it
/// if needed. Point coordinates are rounded to `f32` on disk.
pub fn save_sequence(
    dir: &Path,
    seq: &Sequence,
    gt: Option<&GroundTruth>,
) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let meta_path = dir.join("meta.json");
    let meta = Meta { id: seq.id.clone(), hz: seq.hz };
    fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("meta serializes"))
        .map_err(io_err(&meta_path))?;

    let poses_path = dir.join("poses.jsonl");
    let mut poses = Vec::new();
    for f in &seq.frames {
        let r = &f.pose.rotation;
        let row = PoseRow {
            index: f.index,
            timestamp_s: f.timestamp_s,
            rotation: r.iter().flatten().copied().collect(),
            translation: [f.pose.translation.x, f.pose.translation.y, f.pose.translation.z],
        };
        poses.push(serde_json::to_string(&row).expect("pose serializes"));
    }
    fs::write(&poses_path, poses.join("\n") + "\n").map_err(io_err(&poses_path))?;

    for f in &seq.frames {
        let path = dir.join(frame_file_name(f.index));
        let mut buf = Vec::with_capacity(f.points.len() * 12);
        for p in &f.points {
            buf.extend_from_slice(&(p.x as f32).to_le_bytes());
            buf.extend_from_slice(&(p.y as f32).to_le_bytes());
            buf.extend_from_slice(&(p.z as f32).to_le_bytes());
        }
        fs::write(&path, buf).map_err(io_err(&path))?;
    }

    if let Some(gt) = gt {
        save_ground_truth(dir, gt)?;
    }
    Ok(())
}

pub fn save_ground_truth(dir: &Path, gt: &GroundTruth) -> Result<(), DataError> {
    let path = dir.join("gt.jsonl");
    let mut out = Vec::new();
    for o in &gt.objects {
        let row = GtRow {
            frame: o.frame,
            track_id: o.track_id,
            box7: o.box7.to_array(),
            speed_mps: o.speed_mps,
            point_flows: if o.point_flows.is_empty() {
                None
            } else {
                Some(o.point_flows.iter().map(|(i, f)| (*i, f.x, f.y, f.z)).collect())
            },
        };
        out.push(serde_json::to_string(&row).expect("gt row serializes"));
    }
    let mut body = out.join("\n");
    body.push('\n');
    fs::write(&path, body).map_err(io_err(&path))
}

/// Loads a sequence directory written by [`save_sequence`] (or anything
/// following the same layout). Validates pose orthonormality, timestamp
/// monotonicity, point finiteness and file sizes.
pub fn load_sequence(dir: &Path) -> Result<Sequence, DataError> {
    let meta_path = dir.join("meta.json");
    let meta_body = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: Meta = serde_json::from_str(&meta_body).map_err(|e| DataError::Malformed {
        path: meta_path.clone(),
        reason: e.to_string(),
    })?;
    if !(meta.hz.is_finite() && meta.hz > 0.0) {
        return Err(DataError::Malformed {
            path: meta_path,
            reason: format!("hz must be positive, got {}", meta.hz),
        });
    }

    let poses_path = dir.join("poses.jsonl");
    let file = fs::File::open(&poses_path).map_err(io_err(&poses_path))?;
    let mut rows: Vec<PoseRow> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&poses_path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PoseRow =
            serde_json::from_str(&line).map_err(|e| DataError::MalformedLine {
                path: poses_path.clone(),
                line: lineno + 1,
                reason: e.to_string(),
            })?;
        if row.rotation.len() != 9 {
            return Err(DataError::MalformedLine {
                path: poses_path.clone(),
                line: lineno + 1,
                reason: format!("rotation must have 9 entries, got {}", row.rotation.len()),
            });
        }
        rows.push(row);
    }
    rows.sort_by_key(|r| r.index);

    let mut frames = Vec::with_capacity(rows.len());
    for (want, row) in rows.iter().enumerate() {
        if row.index != want {
            return Err(DataError::MissingPose { frame: want });
        }
        if want > 0 && row.timestamp_s <= rows[want - 1].timestamp_s {
            return Err(DataError::NonMonotoneTimestamps { frame: want });
        }
        let r = &row.rotation;
        let rotation = [[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]];
        let pose = RigidTransform::new(
            rotation,
            Point3::new(row.translation[0], row.translation[1], row.translation[2]),
        )?;
        let path = dir.join(frame_file_name(row.index));
        let points = read_pts(&path)?;
        frames.push(Frame { index: row.index, timestamp_s: row.timestamp_s, points, pose });
    }

    Ok(Sequence { id: meta.id, hz: meta.hz, frames })
}

fn read_pts(path: &Path) -> Result<PointSet, DataError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() % 12 != 0 {
        return Err(DataError::Malformed {
            path: path.to_path_buf(),
            reason: format!("file size {} is not a multiple of 12", bytes.len()),
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / 12);
    for (i, chunk) in bytes.chunks_exact(12).enumerate() {
        let x = f32::from_le_bytes(chunk[0..4].try_into().unwrap()) as f64;
        let y = f32::from_le_bytes(chunk[4..8].try_into().unwrap()) as f64;
        let z = f32::from_le_bytes(chunk[8..12].try_into().unwrap()) as f64;
        let p = Point3::new(x, y, z);
        if !p.is_finite() {
            return Err(DataError::Malformed {
                path: path.to_path_buf(),
                reason: format!("non-finite coordinate in point {i}"),
            });
        }
        points.push(p);
    }
    Ok(points)
}

/// Loads `gt.jsonl` from a sequence directory.
pub fn load_ground_truth(dir: &Path) -> Result<GroundTruth, DataError> {
    let path = dir.join("gt.jsonl");
    let file = fs::File::open(&path).map_err(io_err(&path))?;
    let mut objects = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let row: GtRow = serde_json::from_str(&line).map_err(|e| DataError::MalformedLine {
            path: path.clone(),
            line: lineno + 1,
            reason: e.to_string(),
        })?;
        objects.push(GtObject {
            frame: row.frame,
            track_id: row.track_id,
            box7: Box7::from_array(&row.box7)?,
            speed_mps: row.speed_mps,
            point_flows: row
                .point_flows
                .unwrap_or_default()
                .into_iter()
                .map(|(i, x, y, z)| (i, Point3::new(x, y, z)))
                .collect(),
        });
    }
    objects.sort_by_key(|o| (o.frame, o.track_id));
    Ok(GroundTruth { objects })
}

/// Writes one frame's flow field: `n` little-endian f32 x,y,z triples
/// followed by `n` status bytes, aligned with the frame's point file.
pub fn write_flow_bin(
    path: &Path,
    flows: &[Point3],
    statuses: &[u8],
) -> Result<(), DataError> {
    assert_eq!(flows.len(), statuses.len());
    let mut buf = Vec::with_capacity(flows.len() * 13);
    for f in flows {
        buf.extend_from_slice(&(f.x as f32).to_le_bytes());
        buf.extend_from_slice(&(f.y as f32).to_le_bytes());
        buf.extend_from_slice(&(f.z as f32).to_le_bytes());
    }
    buf.extend_from_slice(statuses);
    fs::write(path, buf).map_err(io_err(path))
}

/// Reads a flow file written by [`write_flow_bin`].
pub fn read_flow_bin(path: &Path) -> Result<(Vec<Point3>, Vec<u8>), DataError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() % 13 != 0 {
        return Err(DataError::Malformed {
            path: path.to_path_buf(),
            reason: format!("flow file size {} is not a multiple of 13", bytes.len()),
        });
    }
    let n = bytes.len() / 13;
    let mut flows = Vec::with_capacity(n);
    for chunk in bytes[..n * 12].chunks_exact(12) {
        flows.push(Point3::new(
            f32::from_le_bytes(chunk[0..4].try_into().unwrap()) as f64,
            f32::from_le_bytes(chunk[4..8].try_into().unwrap()) as f64,
            f32::from_le_bytes(chunk[8..12].try_into().unwrap()) as f64,
        ));
    }
    let statuses = bytes[n * 12..].to_vec();
    Ok((flows, statuses))
}

/// Export file name for one frame's flow field.
pub fn flow_file_name(index: usize) -> String {
    format!("flow_{index:06}.bin")
}
