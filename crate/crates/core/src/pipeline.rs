//! End-to-end orchestration: one TOML configuration drives scene
//! generation, the preprocess → flow → auto-label chain, and evaluation.
//!
//! Every run is reproducible from its inputs: all randomness flows from
//! the single `seed`, and label runs write a manifest recording the
//! configuration (verbatim and hashed), the seed, per-stage wall times
//! and per-cluster solver outcomes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autolabel::{export_labels, import_labels, run_autolabel, AutolabelConfig, AutolabelError};
use crate::data::generate::{generate_scene, GenError, SceneRecipe};
use crate::data::{
    flow_file_name, load_ground_truth, load_sequence, read_flow_bin, save_sequence,
    write_flow_bin, DataError, Sequence,
};
use crate::flow::{estimate_frame_flow, ClusterReport, FlowConfig, FlowField, PointStatus};
use crate::geom::Box7;
use crate::metrics::{
    detection_eval, flow_metrics, oracle_substitution, EvalReport, GtBox, MetricsError, PredBox,
    DEFAULT_SPEED_EDGES_MPS,
};
use crate::preprocess::{classify_sequence, PreprocessConfig, PreprocessedFrame};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Autolabel(#[from] AutolabelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl PipelineError {
    /// Process exit code: 1 for usage or configuration problems, 2 for
    /// data problems, 3 for internal invariant violations.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Config { .. } | PipelineError::Usage(_) | PipelineError::Gen(_) => 1,
            PipelineError::Autolabel(AutolabelError::BadGrid(_)) => 1,
            PipelineError::Metrics(MetricsError::BadEdges(_))
            | PipelineError::Metrics(MetricsError::BadTimeStep(_)) => 1,
            PipelineError::Data(_)
            | PipelineError::Metrics(MetricsError::MisalignedLengths { .. })
            | PipelineError::Metrics(MetricsError::Empty)
            | PipelineError::Metrics(MetricsError::Io { .. }) => 2,
            _ => 3,
        }
    }
}

/// Evaluation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// 3D IoU threshold for box matching.
    pub iou_thresh: f64,
    /// Speed-class boundaries in m/s.
    pub speed_edges_mps: Vec<f64>,
    /// Also write PR-curve and error-histogram CSVs next to the report.
    pub csv: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            iou_thresh: 0.4,
            speed_edges_mps: DEFAULT_SPEED_EDGES_MPS.to_vec(),
            csv: false,
        }
    }
}

/// The single configuration file: one block per stage plus the global
/// seed. Unknown keys are rejected everywhere so a typo in any threshold
/// fails loudly instead of silently running defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Default output directory; the command line can override it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Scene recipe for `gen`; absent when only labeling real data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneRecipe>,
    pub preprocess: PreprocessConfig,
    pub flow: FlowConfig,
    pub autolabel: AutolabelConfig,
    pub metrics: MetricsConfig,
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, PipelineError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::Config { path: path.to_path_buf(), reason: e.to_string() })?;
    toml::from_str(&text)
        .map_err(|e| PipelineError::Config { path: path.to_path_buf(), reason: e.to_string() })
}

/// Hash of the canonical serialized configuration, independent of the
/// formatting of the file it was loaded from.
fn config_sha256(cfg: &PipelineConfig) -> String {
    let canonical = toml::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub name: String,
    pub wall_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameClusters {
    pub frame: usize,
    pub clusters: Vec<ClusterReport>,
}

/// Record of one labeling (or flow-only) run: everything needed to
/// reproduce it bit-exactly (configuration + seed) plus diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub config: PipelineConfig,
    pub seed: u64,
    pub sequence_id: String,
    pub frames: usize,
    pub stages: Vec<StageTiming>,
    pub clusters: Vec<FrameClusters>,
    pub tracks: usize,
    pub label_rows: usize,
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<(), PipelineError> {
    let path = out.join("manifest.json");
    let body = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, body + "\n").map_err(|source| DataError::Io { path, source })?;
    Ok(())
}

/// Generates the configured synthetic scene into `out` (sequence files
/// plus ground truth).
pub fn run_gen(cfg: &PipelineConfig, out: &Path) -> Result<(), PipelineError> {
    let recipe = cfg
        .scene
        .as_ref()
        .ok_or_else(|| PipelineError::Usage("config has no [scene] block to generate from".into()))?;
    let (seq, gt) = generate_scene(recipe, cfg.seed)?;
    save_sequence(out, &seq, Some(&gt))?;
    log::info!("generated {} frames into {}", seq.len(), out.display());
    Ok(())
}

/// Shared preprocess + flow stages: classifies every frame, estimates
/// flow for each frame transition, and writes one flow file per
/// transition into `out`.
fn flow_stages(
    seq: &Sequence,
    cfg: &PipelineConfig,
    out: &Path,
    stages: &mut Vec<StageTiming>,
) -> Result<(Vec<PreprocessedFrame>, Vec<FlowField>, Vec<FrameClusters>), PipelineError> {
    let t0 = Instant::now();
    let pre = classify_sequence(seq, &cfg.preprocess, cfg.seed);
    stages.push(StageTiming { name: "preprocess".into(), wall_s: t0.elapsed().as_secs_f64() });

    let t1 = Instant::now();
    let mut fields = Vec::new();
    let mut clusters = Vec::new();
    for t in 0..seq.len().saturating_sub(1) {
        let frame_flow = estimate_frame_flow(
            &pre[t].world_points,
            &pre[t].mask,
            &pre[t + 1].world_points,
            &pre[t + 1].mask,
            &cfg.flow,
            cfg.seed,
            t,
        );
        let statuses: Vec<u8> = frame_flow.field.status.iter().map(|s| s.to_byte()).collect();
        write_flow_bin(&out.join(flow_file_name(t)), &frame_flow.field.flows, &statuses)?;
        clusters.push(FrameClusters { frame: t, clusters: frame_flow.clusters });
        fields.push(frame_flow.field);
    }
    stages.push(StageTiming { name: "flow".into(), wall_s: t1.elapsed().as_secs_f64() });
    Ok((pre, fields, clusters))
}

/// Runs preprocessing and flow estimation only, writing flow files and a
/// manifest into `out`.
pub fn run_flow(cfg: &PipelineConfig, seq_dir: &Path, out: &Path) -> Result<RunManifest, PipelineError> {
    let seq = load_sequence(seq_dir)?;
    fs::create_dir_all(out).map_err(|source| DataError::Io { path: out.to_path_buf(), source })?;
    let mut stages = Vec::new();
    let (_, _, clusters) = flow_stages(&seq, cfg, out, &mut stages)?;
    let manifest = RunManifest {
        config_sha256: config_sha256(cfg),
        config: cfg.clone(),
        seed: cfg.seed,
        sequence_id: seq.id.clone(),
        frames: seq.len(),
        stages,
        clusters,
        tracks: 0,
        label_rows: 0,
    };
    write_manifest(out, &manifest)?;
    Ok(manifest)
}

/// The full labeling pipeline: preprocess, flow, proposals + tracking +
/// shape registration. Writes flow files, `labels.jsonl` and
/// `manifest.json` into `out`.
pub fn run_label(cfg: &PipelineConfig, seq_dir: &Path, out: &Path) -> Result<RunManifest, PipelineError> {
    let seq = load_sequence(seq_dir)?;
    fs::create_dir_all(out).map_err(|source| DataError::Io { path: out.to_path_buf(), source })?;
    let mut stages = Vec::new();
    let (pre, fields, clusters) = flow_stages(&seq, cfg, out, &mut stages)?;

    let t2 = Instant::now();
    let frames_world: Vec<Vec<crate::geom::Point3>> =
        pre.iter().map(|p| p.world_points.clone()).collect();
    let tracks = run_autolabel(&frames_world, &fields, seq.dt(), &cfg.autolabel)?;
    export_labels(&out.join("labels.jsonl"), &tracks)?;
    stages.push(StageTiming { name: "autolabel".into(), wall_s: t2.elapsed().as_secs_f64() });

    let manifest = RunManifest {
        config_sha256: config_sha256(cfg),
        config: cfg.clone(),
        seed: cfg.seed,
        sequence_id: seq.id.clone(),
        frames: seq.len(),
        stages,
        clusters,
        tracks: tracks.len(),
        label_rows: tracks.iter().map(|t| t.len()).sum(),
    };
    write_manifest(out, &manifest)?;
    log::info!(
        "labeled {}: {} tracks, {} rows",
        seq.id,
        manifest.tracks,
        manifest.label_rows
    );
    Ok(manifest)
}

/// Loads exported labels as scoreless prediction boxes.
fn load_pred_boxes(path: &Path) -> Result<Vec<PredBox>, PipelineError> {
    import_labels(path)?
        .iter()
        .map(|r| {
            let box7 = Box7::from_array(&r.box7).map_err(DataError::from)?;
            Ok(PredBox { frame: r.frame, box7, score: None })
        })
        .collect()
}

/// Concatenated stored flow fields and matching ground-truth flows over
/// every frame transition of the sequence; `None` when no flow files are
/// present in `run_dir`.
fn load_flow_eval_inputs(
    run_dir: &Path,
    seq: &Sequence,
    gt: &crate::data::GroundTruth,
) -> Result<Option<(FlowField, Vec<crate::geom::Point3>)>, PipelineError> {
    if seq.len() < 2 || !run_dir.join(flow_file_name(0)).exists() {
        return Ok(None);
    }
    let mut field = FlowField { flows: Vec::new(), status: Vec::new() };
    let mut gt_flows = Vec::new();
    for t in 0..seq.len() - 1 {
        let path = run_dir.join(flow_file_name(t));
        let (flows, statuses) = read_flow_bin(&path)?;
        let n = seq.frames[t].points.len();
        if flows.len() != n {
            return Err(DataError::Malformed {
                path,
                reason: format!("{} flow rows for a frame of {} points", flows.len(), n),
            }
            .into());
        }
        for b in &statuses {
            let status = PointStatus::from_byte(*b).ok_or_else(|| DataError::Malformed {
                path: path.clone(),
                reason: format!("unknown status byte {b}"),
            })?;
            field.status.push(status);
        }
        field.flows.extend(flows);
        gt_flows.extend(gt.frame_flows(t, n));
    }
    Ok(Some((field, gt_flows)))
}

/// Scores a label run against the sequence's ground truth.
///
/// `run_dir` is a directory produced by [`run_label`] (or [`run_flow`]
/// plus external labels): `labels.jsonl` is required, flow files are
/// evaluated when present. When `write` is set, `report.json` (and CSVs,
/// if configured) are written into `run_dir`.
pub fn run_eval(
    cfg: &PipelineConfig,
    seq_dir: &Path,
    run_dir: &Path,
    write: bool,
) -> Result<EvalReport, PipelineError> {
    let seq = load_sequence(seq_dir)?;
    let gt = load_ground_truth(seq_dir)?;

    let preds = load_pred_boxes(&run_dir.join("labels.jsonl"))?;
    let gts: Vec<GtBox> =
        gt.objects.iter().map(|o| GtBox { frame: o.frame, box7: o.box7 }).collect();
    let detection = detection_eval(&preds, &gts, cfg.metrics.iou_thresh);
    let substitution = oracle_substitution(&preds, &gts, cfg.metrics.iou_thresh);

    let flow = match load_flow_eval_inputs(run_dir, &seq, &gt)? {
        Some((field, gt_flows)) => {
            Some(flow_metrics(&field, &gt_flows, seq.dt(), &cfg.metrics.speed_edges_mps)?)
        }
        None => None,
    };

    let report = EvalReport::new(flow, detection, substitution);
    if write {
        report.write_json(&run_dir.join("report.json"))?;
        if cfg.metrics.csv {
            report.write_pr_csv(&run_dir.join("pr_curve.csv"))?;
            report.write_histogram_csv(&run_dir.join("error_histograms.csv"))?;
        }
    }
    Ok(report)
}
