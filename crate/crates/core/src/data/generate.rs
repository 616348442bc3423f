//! Synthetic scene generator.
//!
//! Builds sequences with known ground truth: rigid objects sampled on box
//! surfaces following piecewise-constant velocity / yaw-rate trajectories,
//! a moving ego sensor, and static background (ground plane, walls, poles).
//! Every scene is a pure function of its recipe and seed.
//!
//! Two noise knobs with different semantics:
//!
//! * `noise_sigma_m` perturbs each surface sample once, when the shape is
//!   sampled. The rough shape then moves rigidly, so per-point ground-truth
//!   flow is exactly the rigid displacement of the emitted point.
//! * `jitter_sigma_m` adds fresh measurement noise per frame; it breaks
//!   exact rigidity the way a real sensor does. Defaults to zero.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Frame, GroundTruth, GtObject, Sequence};
use crate::geom::{bev_iou, Box7, Point3, RigidTransform};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("objects {a} and {b} interpenetrate at frame 0")]
    Interpenetration { a: usize, b: usize },
    #[error("invalid recipe: {0}")]
    BadRecipe(String),
}

/// Complete description of a synthetic scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRecipe {
    #[serde(default = "default_id")]
    pub id: String,
    pub frames: usize,
    pub hz: f64,
    /// Frozen per-point shape perturbation (meters, std dev per axis).
    #[serde(default)]
    pub noise_sigma_m: f64,
    /// Fresh per-frame measurement noise (meters, std dev per axis).
    #[serde(default)]
    pub jitter_sigma_m: f64,
    /// Reference range for 1/r^2 density falloff; omit to disable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_falloff_m: Option<f64>,
    #[serde(default)]
    pub ego: EgoRecipe,
    #[serde(default)]
    pub objects: Vec<ObjectRecipe>,
    #[serde(default)]
    pub background: BackgroundRecipe,
}

fn default_id() -> String {
    "scene".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoRecipe {
    #[serde(default)]
    pub start: [f64; 2],
    #[serde(default)]
    pub heading: f64,
    #[serde(default)]
    pub speed_mps: f64,
    #[serde(default)]
    pub yaw_rate_rps: f64,
    #[serde(default = "default_sensor_height")]
    pub height_m: f64,
}

fn default_sensor_height() -> f64 {
    1.8
}

impl Default for EgoRecipe {
    fn default() -> Self {
        EgoRecipe {
            start: [0.0, 0.0],
            heading: 0.0,
            speed_mps: 0.0,
            yaw_rate_rps: 0.0,
            height_m: default_sensor_height(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecipe {
    /// Length, width, height of the box shape.
    pub dims: [f64; 3],
    /// BEV start position of the box center.
    pub start: [f64; 2],
    #[serde(default = "default_clearance")]
    pub clearance_m: f64,
    #[serde(default)]
    pub heading: f64,
    #[serde(default)]
    pub speed_mps: f64,
    #[serde(default)]
    pub yaw_rate_rps: f64,
    /// Number of surface samples.
    pub points: usize,
    /// Optional piecewise schedule; when present it overrides
    /// `speed_mps`/`yaw_rate_rps` frame by frame (last segment persists).
    #[serde(default)]
    pub segments: Vec<SegmentRecipe>,
    #[serde(default)]
    pub dropout: DropoutRecipe,
}

fn default_clearance() -> f64 {
    0.3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecipe {
    pub frames: usize,
    pub speed_mps: f64,
    #[serde(default)]
    pub yaw_rate_rps: f64,
}

/// Per-frame visibility model for one object.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DropoutRecipe {
    /// Every sample visible every frame.
    #[default]
    None,
    /// Independent per-frame dropout of each sample with probability `frac`.
    Random { frac: f64 },
    /// Complementary occlusion: each frame sees a `visible_frac` window of
    /// the object along its local x axis, and the window slides from the
    /// leading edge on the first frame to the trailing edge on the last.
    /// No frame sees the whole shape, the first and last views are
    /// complementary, and the union over the sequence covers everything —
    /// the way a gradually changing viewpoint reveals an occluded object.
    Windows { visible_frac: f64 },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundRecipe {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground: Option<GroundRecipe>,
    #[serde(default)]
    pub walls: Vec<WallRecipe>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundRecipe {
    /// Samples cover the square `[-half_extent, half_extent]^2` at z = 0.
    pub half_extent_m: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallRecipe {
    pub center: [f64; 2],
    pub dims: [f64; 3],
    #[serde(default)]
    pub heading: f64,
    pub points: usize,
}

/// Standard-normal draw via Box–Muller; keeps the generator free of any
/// distribution-crate version drift.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>();
        if u > 1e-300 {
            let v: f64 = rng.gen::<f64>();
            return (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
        }
    }
}

fn noise3(rng: &mut ChaCha8Rng, sigma: f64) -> Point3 {
    if sigma == 0.0 {
        Point3::ZERO
    } else {
        Point3::new(gauss(rng) * sigma, gauss(rng) * sigma, gauss(rng) * sigma)
    }
}

/// Samples `n` points on the surface of an origin-centered `l x w x h` box,
/// skipping the bottom face (a LiDAR never sees it).
fn sample_box_surface(rng: &mut ChaCha8Rng, dims: [f64; 3], n: usize) -> Vec<Point3> {
    let [l, w, h] = dims;
    // top, +y side, -y side, +x cap, -x cap
    let areas = [l * w, l * h, l * h, w * h, w * h];
    let total: f64 = areas.iter().sum();
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = rng.gen::<f64>() * total;
        let mut face = 0;
        for (i, a) in areas.iter().enumerate() {
            if pick < *a {
                face = i;
                break;
            }
            pick -= a;
        }
        let u: f64 = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen::<f64>() - 0.5;
        let p = match face {
            0 => Point3::new(u * l, v * w, h / 2.0),
            1 => Point3::new(u * l, w / 2.0, v * h),
            2 => Point3::new(u * l, -w / 2.0, v * h),
            3 => Point3::new(l / 2.0, u * w, v * h),
            _ => Point3::new(-l / 2.0, u * w, v * h),
        };
        pts.push(p);
    }
    pts
}

/// A body trajectory flattened to one pose per frame index, with one extra
/// step past the end so that flow is defined for the last emitted frame.
struct Trajectory {
    /// BEV position and heading per step, `frames + 1` entries.
    states: Vec<(f64, f64, f64)>,
    /// Speed in m/s per frame, `frames + 1` entries.
    speeds: Vec<f64>,
}

fn integrate(
    start: [f64; 2],
    heading: f64,
    schedule: &[(f64, f64)], // (speed, yaw rate) per frame
    dt: f64,
) -> Trajectory {
    let mut states = Vec::with_capacity(schedule.len() + 1);
    let mut speeds = Vec::with_capacity(schedule.len() + 1);
    let (mut x, mut y, mut th) = (start[0], start[1], heading);
    for &(v, w) in schedule {
        states.push((x, y, th));
        speeds.push(v);
        x += th.cos() * v * dt;
        y += th.sin() * v * dt;
        th += w * dt;
    }
    let last = schedule.last().copied().unwrap_or((0.0, 0.0));
    states.push((x, y, th));
    speeds.push(last.0);
    Trajectory { states, speeds }
}

fn object_schedule(o: &ObjectRecipe, frames: usize) -> Vec<(f64, f64)> {
    let mut per_frame = Vec::with_capacity(frames + 1);
    if o.segments.is_empty() {
        per_frame.resize(frames + 1, (o.speed_mps, o.yaw_rate_rps));
    } else {
        'outer: for seg in &o.segments {
            for _ in 0..seg.frames {
                per_frame.push((seg.speed_mps, seg.yaw_rate_rps));
                if per_frame.len() > frames {
                    break 'outer;
                }
            }
        }
        let last = *per_frame.last().unwrap_or(&(0.0, 0.0));
        per_frame.resize(frames + 1, last);
    }
    per_frame
}

fn object_pose(state: (f64, f64, f64), z_center: f64) -> RigidTransform {
    RigidTransform::from_yaw_translation(state.2, Point3::new(state.0, state.1, z_center))
}

/// Generates a scene. The same `(recipe, seed)` always produces the same
/// sequence and ground truth, bit for bit.
pub fn generate_scene(
    recipe: &SceneRecipe,
    seed: u64,
) -> Result<(Sequence, GroundTruth), GenError> {
    if recipe.frames == 0 {
        return Err(GenError::BadRecipe("frames must be >= 1".into()));
    }
    if !(recipe.hz.is_finite() && recipe.hz > 0.0) {
        return Err(GenError::BadRecipe(format!("hz must be positive, got {}", recipe.hz)));
    }
    for (i, o) in recipe.objects.iter().enumerate() {
        if o.dims.iter().any(|d| *d <= 0.0) {
            return Err(GenError::BadRecipe(format!("object {i}: non-positive dims")));
        }
        if o.points == 0 {
            return Err(GenError::BadRecipe(format!("object {i}: needs at least one point")));
        }
        match o.dropout {
            DropoutRecipe::Random { frac } if !(0.0..1.0).contains(&frac) => {
                return Err(GenError::BadRecipe(format!(
                    "object {i}: dropout frac must be in [0, 1), got {frac}"
                )));
            }
            DropoutRecipe::Windows { visible_frac } if !(0.0..=1.0).contains(&visible_frac) => {
                return Err(GenError::BadRecipe(format!(
                    "object {i}: visible_frac must be in (0, 1], got {visible_frac}"
                )));
            }
            _ => {}
        }
    }

    let dt = 1.0 / recipe.hz;
    let frames = recipe.frames;

    // Frozen shapes, sampled once from the master stream in recipe order.
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut shapes: Vec<Vec<Point3>> = Vec::new();
    for o in &recipe.objects {
        let mut pts = sample_box_surface(&mut master, o.dims, o.points);
        for p in &mut pts {
            *p += noise3(&mut master, recipe.noise_sigma_m);
        }
        shapes.push(pts);
    }
    let ground_pts: Vec<Point3> = match &recipe.background.ground {
        Some(g) => (0..g.points)
            .map(|_| {
                let x = (master.gen::<f64>() - 0.5) * 2.0 * g.half_extent_m;
                let y = (master.gen::<f64>() - 0.5) * 2.0 * g.half_extent_m;
                Point3::new(x, y, 0.0) + noise3(&mut master, recipe.noise_sigma_m)
            })
            .collect(),
        None => Vec::new(),
    };
    let wall_pts: Vec<Vec<Point3>> = recipe
        .background
        .walls
        .iter()
        .map(|w| {
            let pose = RigidTransform::from_yaw_translation(
                w.heading,
                Point3::new(w.center[0], w.center[1], w.dims[2] / 2.0),
            );
            sample_box_surface(&mut master, w.dims, w.points)
                .into_iter()
                .map(|p| pose.apply(&p) + noise3(&mut master, recipe.noise_sigma_m))
                .collect()
        })
        .collect();

    // Trajectories, one step past the end.
    let ego_traj = integrate(
        recipe.ego.start,
        recipe.ego.heading,
        &vec![(recipe.ego.speed_mps, recipe.ego.yaw_rate_rps); frames + 1],
        dt,
    );
    let obj_trajs: Vec<Trajectory> = recipe
        .objects
        .iter()
        .map(|o| integrate(o.start, o.heading, &object_schedule(o, frames), dt))
        .collect();

    // Interpenetration check at frame 0.
    let boxes0: Vec<Box7> = recipe
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let (x, y, th) = obj_trajs[i].states[0];
            Box7::new(
                Point3::new(x, y, o.clearance_m + o.dims[2] / 2.0),
                o.dims[0],
                o.dims[1],
                o.dims[2],
                th,
            )
            .expect("validated dims")
        })
        .collect();
    for a in 0..boxes0.len() {
        for b in (a + 1)..boxes0.len() {
            if bev_iou(&boxes0[a], &boxes0[b]) > 0.0 {
                return Err(GenError::Interpenetration { a, b });
            }
        }
    }

    let mut seq_frames = Vec::with_capacity(frames);
    let mut gt_objects = Vec::new();

    for k in 0..frames {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(seed, k as u64));
        let (ex, ey, eth) = ego_traj.states[k];
        let ego_pose = RigidTransform::from_yaw_translation(
            eth,
            Point3::new(ex, ey, recipe.ego.height_m),
        );
        let ego_inv = ego_pose.inverse();
        let sensor_pos = ego_pose.translation;

        let mut world_points: Vec<Point3> = Vec::new();
        let mut world_flows: Vec<Point3> = Vec::new();

        let keep_by_range = |p: &Point3, rng: &mut ChaCha8Rng| -> bool {
            match recipe.range_falloff_m {
                None => true,
                Some(r0) => {
                    let r2 = crate::geom::dist2(p, &sensor_pos);
                    let prob = (r0 * r0 / r2.max(1e-6)).min(1.0);
                    rng.gen::<f64>() < prob
                }
            }
        };

        for (i, o) in recipe.objects.iter().enumerate() {
            let z_c = o.clearance_m + o.dims[2] / 2.0;
            let pose_now = object_pose(obj_trajs[i].states[k], z_c);
            let pose_next = object_pose(obj_trajs[i].states[k + 1], z_c);
            let shape = &shapes[i];

            // Local-x visibility window bounds for this frame, if any.
            let window = match o.dropout {
                DropoutRecipe::Windows { visible_frac } => {
                    let half = o.dims[0] / 2.0;
                    let span = o.dims[0] * (1.0 - visible_frac);
                    let t = if recipe.frames > 1 {
                        k as f64 / (recipe.frames - 1) as f64
                    } else {
                        0.0
                    };
                    let lo = -half + span * t;
                    Some((lo, lo + visible_frac * o.dims[0]))
                }
                _ => None,
            };

            let mut flow_rows = Vec::new();
            for q in shape {
                let visible = match o.dropout {
                    DropoutRecipe::None => true,
                    DropoutRecipe::Random { frac } => rng.gen::<f64>() >= frac,
                    DropoutRecipe::Windows { .. } => {
                        let (lo, hi) = window.unwrap();
                        q.x >= lo && q.x <= hi
                    }
                };
                if !visible {
                    continue;
                }
                let w_now = pose_now.apply(q);
                if !keep_by_range(&w_now, &mut rng) {
                    continue;
                }
                let flow = pose_next.apply(q) - w_now;
                flow_rows.push((world_points.len(), flow));
                world_points.push(w_now + noise3(&mut rng, recipe.jitter_sigma_m));
                world_flows.push(flow);
            }

            let (x, y, th) = obj_trajs[i].states[k];
            gt_objects.push(GtObject {
                frame: k,
                track_id: i as u64,
                box7: Box7::new(Point3::new(x, y, z_c), o.dims[0], o.dims[1], o.dims[2], th)
                    .expect("validated dims"),
                speed_mps: obj_trajs[i].speeds[k],
                point_flows: if k + 1 < frames { flow_rows } else { Vec::new() },
            });
        }

        for p in ground_pts.iter().chain(wall_pts.iter().flatten()) {
            if !keep_by_range(p, &mut rng) {
                continue;
            }
            world_points.push(*p + noise3(&mut rng, recipe.jitter_sigma_m));
            world_flows.push(Point3::ZERO);
        }

        let sensor_points = ego_inv.transform_points(&world_points);
        seq_frames.push(Frame {
            index: k,
            timestamp_s: k as f64 * dt,
            points: sensor_points,
            pose: ego_pose,
        });
    }

    // Flow rows on the last frame were dropped above; strip any flow rows
    // pointing past the final frame for single-frame scenes as well.
    let seq = Sequence { id: recipe.id.clone(), hz: recipe.hz, frames: seq_frames };
    Ok((seq, GroundTruth { objects: gt_objects }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_object_recipe() -> SceneRecipe {
        SceneRecipe {
            id: "test".into(),
            frames: 6,
            hz: 10.0,
            noise_sigma_m: 0.02,
            jitter_sigma_m: 0.0,
            range_falloff_m: None,
            ego: EgoRecipe { speed_mps: 1.0, ..Default::default() },
            objects: vec![
                ObjectRecipe {
                    dims: [4.0, 1.8, 1.5],
                    start: [10.0, 0.0],
                    clearance_m: 0.3,
                    heading: 0.0,
                    speed_mps: 5.0,
                    yaw_rate_rps: 0.0,
                    points: 120,
                    segments: vec![],
                    dropout: DropoutRecipe::None,
                },
                ObjectRecipe {
                    dims: [0.8, 0.8, 1.7],
                    start: [5.0, 6.0],
                    clearance_m: 0.1,
                    heading: 1.2,
                    speed_mps: 1.5,
                    yaw_rate_rps: 0.2,
                    points: 60,
                    segments: vec![],
                    dropout: DropoutRecipe::None,
                },
            ],
            background: BackgroundRecipe {
                ground: Some(GroundRecipe { half_extent_m: 20.0, points: 400 }),
                walls: vec![WallRecipe {
                    center: [0.0, -10.0],
                    dims: [12.0, 0.4, 2.5],
                    heading: 0.0,
                    points: 150,
                }],
            },
        }
    }

    #[test]
    fn flow_is_exactly_the_rigid_displacement() {
        let recipe = two_object_recipe();
        let (seq, gt) = generate_scene(&recipe, 7).unwrap();
        for k in 0..seq.len() - 1 {
            let now = seq.frames[k].to_world();
            let next = seq.frames[k + 1].to_world();
            for obj in gt.frame_objects(k) {
                assert!(!obj.point_flows.is_empty());
                // With no dropout the full shape is emitted in the same
                // order every frame, so corresponding indices line up.
                let base: usize = recipe.objects[..obj.track_id as usize]
                    .iter()
                    .map(|o| o.points)
                    .sum();
                for (j, (idx, flow)) in obj.point_flows.iter().enumerate() {
                    assert_eq!(*idx, base + j);
                    let advected = now[*idx] + *flow;
                    let observed = next[base + j];
                    assert!(
                        crate::geom::dist2(&advected, &observed).sqrt() < 1e-9,
                        "frame {k} obj {} point {j}",
                        obj.track_id
                    );
                }
            }
        }
    }

    #[test]
    fn static_world_is_invariant_under_ego_motion() {
        let mut recipe = two_object_recipe();
        recipe.objects.clear();
        recipe.ego.speed_mps = 6.0;
        recipe.ego.yaw_rate_rps = 0.3;
        let (seq, gt) = generate_scene(&recipe, 3).unwrap();
        assert!(gt.objects.is_empty());
        let w0 = seq.frames[0].to_world();
        let w1 = seq.frames[1].to_world();
        assert_eq!(w0.len(), w1.len());
        for (a, b) in w0.iter().zip(&w1) {
            assert!(crate::geom::dist2(a, b).sqrt() < 1e-9);
        }
    }

    #[test]
    fn interpenetrating_objects_are_rejected() {
        let mut recipe = two_object_recipe();
        recipe.objects[1].start = [10.5, 0.3];
        let err = generate_scene(&recipe, 1).unwrap_err();
        assert!(matches!(err, GenError::Interpenetration { a: 0, b: 1 }), "{err}");
    }

    #[test]
    fn generation_is_deterministic() {
        let (a, _) = generate_scene(&two_object_recipe(), 123).unwrap();
        let (b, _) = generate_scene(&two_object_recipe(), 123).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.points, fb.points);
        }
        let (c, _) = generate_scene(&two_object_recipe(), 124).unwrap();
        assert_ne!(a.frames[0].points, c.frames[0].points);
    }

    #[test]
    fn gt_speed_matches_recipe() {
        let (_, gt) = generate_scene(&two_object_recipe(), 9).unwrap();
        let obj0: Vec<_> = gt.objects.iter().filter(|o| o.track_id == 0).collect();
        assert!(obj0.iter().all(|o| o.speed_mps == 5.0));
        // Per-point flow magnitude over dt recovers the speed for the
        // non-rotating object.
        let dt = 0.1;
        for (_, f) in &obj0[0].point_flows {
            assert!((f.norm() / dt - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn window_dropout_slides_from_front_to_rear() {
        let mut recipe = two_object_recipe();
        recipe.objects.truncate(1);
        recipe.objects[0].dropout = DropoutRecipe::Windows { visible_frac: 0.55 };
        // Dense cloud so the observed extents track the window edges closely.
        recipe.objects[0].points = 400;
        recipe.background = BackgroundRecipe::default();
        let (seq, gt) = generate_scene(&recipe, 5).unwrap();
        let n_full = recipe.objects[0].points;
        let spans: Vec<(f64, f64)> = seq
            .frames
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let frac = f.points.len() as f64 / n_full as f64;
                // The 55% slice excludes the end caps mid-sequence, so the
                // point fraction sits below the length fraction.
                assert!((0.33..0.75).contains(&frac), "visible fraction {frac}");
                // Object center from ground truth, world x extent of the
                // visible window relative to it.
                let cx = gt.frame_objects(k).next().unwrap().box7.center.x;
                let xs: Vec<f64> = f.to_world().iter().map(|p| p.x - cx).collect();
                let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        // The first frame sees the leading 55%, the last the trailing 55%.
        assert!((spans[0].0 + 2.0).abs() < 0.3, "first window start {}", spans[0].0);
        assert!((spans[0].1 - 0.2).abs() < 0.3, "first window end {}", spans[0].1);
        let last = spans.last().unwrap();
        assert!((last.0 + 0.2).abs() < 0.3, "last window start {}", last.0);
        assert!((last.1 - 2.0).abs() < 0.3, "last window end {}", last.1);
        // The window slides monotonically, never showing the full shape.
        for w in spans.windows(2) {
            assert!(w[1].0 > w[0].0 - 0.05);
            assert!(w[1].1 > w[0].1 - 0.05);
        }
        for (lo, hi) in &spans {
            assert!(hi - lo < 0.65 * 4.0, "window too wide: {}", hi - lo);
        }
    }

    #[test]
    fn segments_change_speed_mid_scene() {
        let mut recipe = two_object_recipe();
        recipe.objects.truncate(1);
        recipe.objects[0].segments = vec![
            SegmentRecipe { frames: 3, speed_mps: 2.0, yaw_rate_rps: 0.0 },
            SegmentRecipe { frames: 3, speed_mps: 8.0, yaw_rate_rps: 0.0 },
        ];
        let (_, gt) = generate_scene(&recipe, 2).unwrap();
        let speeds: Vec<f64> = gt.objects.iter().map(|o| o.speed_mps).collect();
        assert_eq!(speeds, vec![2.0, 2.0, 2.0, 8.0, 8.0, 8.0]);
    }
}
