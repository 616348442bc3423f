//! Evaluation of flow fields and box labels.
//!
//! Three independent views of quality:
//!
//! - [`flow_metrics`] — point-wise flow accuracy (end-point error,
//!   threshold accuracies, mean angle error) plus a speed-class confusion
//!   summarized as per-bin IoU,
//! - [`detection_eval`] — box-level precision/recall/AP by greedy matching
//!   at a fixed 3D IoU threshold, with per-pair error decompositions,
//! - [`oracle_substitution`] — re-scores detection after replacing
//!   selected box coordinates with their matched ground-truth values,
//!   isolating which error component costs the most.
//!
//! Everything here is a pure function over immutable inputs; callers that
//! evaluate many frames can run them in parallel and concatenate inputs.

mod report;

pub use report::{ErrorHistograms, EvalReport, Histogram};

use serde::Serialize;
use thiserror::Error;

use crate::flow::FlowField;
use crate::geom::{iou3d, wrap_angle, Box7, Point3};

/// Boundaries (m/s) of the default speed breakdown: 0-3, 3-6, 6-9, 9-12,
/// 12-15 and 15+.
pub const DEFAULT_SPEED_EDGES_MPS: [f64; 5] = [3.0, 6.0, 9.0, 12.0, 15.0];

/// Flow magnitudes below this are treated as zero: they are excluded from
/// the angle metric (direction is undefined) and floor the denominator of
/// the relative-error branch.
const NORM_FLOOR: f64 = 1e-6;

/// Absolute and relative thresholds of the two accuracy metrics: a point
/// counts as accurate when its end-point error is below the absolute
/// threshold *or* its error relative to the ground-truth magnitude is
/// below the fractional one.
const ACC5_ABS_M: f64 = 0.05;
const ACC5_REL: f64 = 0.05;
const ACC10_ABS_M: f64 = 0.10;
const ACC10_REL: f64 = 0.10;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("misaligned flow vectors: {pred} predicted vs {gt} ground truth")]
    MisalignedLengths { pred: usize, gt: usize },
    #[error("no points to evaluate")]
    Empty,
    #[error("speed edges must be finite, positive and strictly increasing, got {0:?}")]
    BadEdges(Vec<f64>),
    #[error("frame interval must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// One speed class of the flow breakdown: the half-open range
/// `[lo_mps, hi_mps)` (`hi_mps = None` for the open-ended top class) with
/// its confusion counts. `iou = tp / (tp + fp + fn)`; `None` when the
/// class is empty on both sides (0/0).
#[derive(Debug, Clone, Serialize)]
pub struct SpeedBinIou {
    pub lo_mps: f64,
    pub hi_mps: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub iou: Option<f64>,
}

/// Point-wise flow quality over one aligned prediction/ground-truth set.
#[derive(Debug, Clone, Serialize)]
pub struct FlowEval {
    /// Mean L2 distance between predicted and true flow vectors (m).
    pub epe3d_m: f64,
    /// Percentage of points with error < 5 cm or relative error < 5%.
    pub acc5_pct: f64,
    /// Percentage of points with error < 10 cm or relative error < 10%.
    pub acc10_pct: f64,
    /// Mean angle between predicted and true vectors (rad), over pairs
    /// where both have a defined direction; 0 when no such pair exists.
    pub theta_rad: f64,
    /// Speed-class confusion, one entry per class.
    pub bins: Vec<SpeedBinIou>,
    /// Mean IoU over occupied classes.
    pub miou: f64,
}

/// Index of the half-open speed class `[edges[i-1], edges[i])` that
/// `speed` falls into; speeds past the last edge land in the open top
/// class `edges.len()`.
fn speed_bin(speed_mps: f64, edges: &[f64]) -> usize {
    edges.iter().take_while(|e| speed_mps >= **e).count()
}

fn validate_edges(edges: &[f64]) -> Result<(), MetricsError> {
    let ok = edges.iter().all(|e| e.is_finite() && *e > 0.0)
        && edges.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(MetricsError::BadEdges(edges.to_vec()))
    }
}

/// Scores a predicted flow field against ground-truth flow vectors.
///
/// Flows are displacements over one frame interval; `dt` converts them to
/// speeds for the class breakdown, where every point is classified twice
/// (by predicted and by true speed) and each class scores
/// `tp / (tp + fp + fn)` as in semantic segmentation.
pub fn flow_metrics(
    pred: &FlowField,
    gt: &[Point3],
    dt: f64,
    edges: &[f64],
) -> Result<FlowEval, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::MisalignedLengths { pred: pred.len(), gt: gt.len() });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(MetricsError::BadTimeStep(dt));
    }
    validate_edges(edges)?;

    let n = gt.len();
    let n_classes = edges.len() + 1;
    let (mut tp, mut fp, mut fn_) = (vec![0usize; n_classes], vec![0usize; n_classes], vec![0usize; n_classes]);
    let mut epe_sum = 0.0;
    let (mut acc5, mut acc10) = (0usize, 0usize);
    let (mut theta_sum, mut theta_n) = (0.0, 0usize);

    for (f_pred, f_gt) in pred.flows.iter().zip(gt) {
        let err = (*f_pred - *f_gt).norm();
        epe_sum += err;

        let gt_norm = f_gt.norm();
        let rel = err / gt_norm.max(NORM_FLOOR);
        if err < ACC5_ABS_M || rel < ACC5_REL {
            acc5 += 1;
        }
        if err < ACC10_ABS_M || rel < ACC10_REL {
            acc10 += 1;
        }

        let pred_norm = f_pred.norm();
        if pred_norm >= NORM_FLOOR && gt_norm >= NORM_FLOOR {
            let cos = (f_pred.dot(f_gt) / (pred_norm * gt_norm)).clamp(-1.0, 1.0);
            theta_sum += cos.acos();
            theta_n += 1;
        }

        let pred_class = speed_bin(pred_norm / dt, edges);
        let gt_class = speed_bin(gt_norm / dt, edges);
        if pred_class == gt_class {
            tp[pred_class] += 1;
        } else {
            fp[pred_class] += 1;
            fn_[gt_class] += 1;
        }
    }

    let mut bins = Vec::with_capacity(n_classes);
    let (mut iou_sum, mut occupied) = (0.0, 0usize);
    for c in 0..n_classes {
        let denom = tp[c] + fp[c] + fn_[c];
        let iou = (denom > 0).then(|| tp[c] as f64 / denom as f64);
        if let Some(v) = iou {
            iou_sum += v;
            occupied += 1;
        }
        bins.push(SpeedBinIou {
            lo_mps: if c == 0 { 0.0 } else { edges[c - 1] },
            hi_mps: edges.get(c).copied(),
            tp: tp[c],
            fp: fp[c],
            fn_: fn_[c],
            iou,
        });
    }

    Ok(FlowEval {
        epe3d_m: epe_sum / n as f64,
        acc5_pct: 100.0 * acc5 as f64 / n as f64,
        acc10_pct: 100.0 * acc10 as f64 / n as f64,
        theta_rad: if theta_n > 0 { theta_sum / theta_n as f64 } else { 0.0 },
        bins,
        miou: iou_sum / occupied.max(1) as f64,
    })
}

/// A box under evaluation. Unscored boxes (auto labels carry no
/// confidence) default to score 1.0.
#[derive(Debug, Clone)]
pub struct PredBox {
    pub frame: usize,
    pub box7: Box7,
    pub score: Option<f64>,
}

/// A ground-truth box.
#[derive(Debug, Clone)]
pub struct GtBox {
    pub frame: usize,
    pub box7: Box7,
}

/// One point of the precision-recall curve, after processing one more
/// prediction in descending score order.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Error decomposition of one overlapping prediction/ground-truth pair:
/// center distance, the largest per-dimension size difference, and the
/// signed wrapped heading difference.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoxErrorSample {
    pub loc_m: f64,
    pub size_m: f64,
    pub orient_rad: f64,
}

/// Box-level evaluation at a fixed IoU threshold.
#[derive(Debug, Clone, Serialize)]
pub struct DetEval {
    pub precision: f64,
    pub recall: f64,
    /// Area under the precision-recall curve (envelope interpolation).
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub pr_curve: Vec<PrPoint>,
    /// One sample per overlapping prediction/ground-truth pair, including
    /// pairs below the matching threshold; the summary histograms in the
    /// report are built from these.
    #[serde(skip)]
    pub errors: Vec<BoxErrorSample>,
}

fn error_sample(pred: &Box7, gt: &Box7) -> BoxErrorSample {
    BoxErrorSample {
        loc_m: (pred.center - gt.center).norm(),
        size_m: (pred.length - gt.length)
            .abs()
            .max((pred.width - gt.width).abs())
            .max((pred.height - gt.height).abs()),
        orient_rad: wrap_angle(pred.heading - gt.heading),
    }
}

/// Score order: descending score, ties by frame then input index, so
/// evaluation is deterministic for unscored label sets.
fn score_order(preds: &[PredBox]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        let sa = preds[a].score.unwrap_or(1.0);
        let sb = preds[b].score.unwrap_or(1.0);
        sb.total_cmp(&sa)
            .then(preds[a].frame.cmp(&preds[b].frame))
            .then(a.cmp(&b))
    });
    order
}

/// Area under the precision-recall points using the precision envelope:
/// each recall increment is weighted by the highest precision achieved at
/// that recall or beyond.
fn envelope_ap(pr: &[PrPoint]) -> f64 {
    let mut suffix_max = vec![0.0; pr.len()];
    let mut run = 0.0f64;
    for (i, p) in pr.iter().enumerate().rev() {
        run = run.max(p.precision);
        suffix_max[i] = run;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, &envelope) in pr.iter().zip(&suffix_max) {
        ap += (p.recall - prev_recall).max(0.0) * envelope;
        prev_recall = p.recall;
    }
    ap
}

/// Greedy box matching and precision/recall/AP at `iou_thresh`.
///
/// Predictions are visited in descending score order; each claims the
/// unmatched same-frame ground-truth box of highest 3D IoU, provided that
/// IoU reaches the threshold. Degenerate denominators (no predictions, no
/// ground truth) report 0 rather than erroring.
pub fn detection_eval(preds: &[PredBox], gts: &[GtBox], iou_thresh: f64) -> DetEval {
    let mut gt_taken = vec![false; gts.len()];
    let mut pr_curve = Vec::with_capacity(preds.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &pi in &score_order(preds) {
        let p = &preds[pi];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if g.frame != p.frame || gt_taken[gi] {
                continue;
            }
            let iou = iou3d(&p.box7, &g.box7);
            if iou >= iou_thresh && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        match best {
            Some((gi, _)) => {
                gt_taken[gi] = true;
                tp += 1;
            }
            None => fp += 1,
        }
        pr_curve.push(PrPoint {
            recall: if gts.is_empty() { 0.0 } else { tp as f64 / gts.len() as f64 },
            precision: tp as f64 / (tp + fp) as f64,
        });
    }

    let mut errors = Vec::new();
    for p in preds {
        for g in gts {
            if g.frame == p.frame && iou3d(&p.box7, &g.box7) > 0.0 {
                errors.push(error_sample(&p.box7, &g.box7));
            }
        }
    }

    DetEval {
        precision: if preds.is_empty() { 0.0 } else { tp as f64 / preds.len() as f64 },
        recall: if gts.is_empty() { 0.0 } else { tp as f64 / gts.len() as f64 },
        ap: envelope_ap(&pr_curve),
        tp,
        fp,
        fn_: gts.len() - tp,
        pr_curve,
        errors,
    }
}

/// AP of four variants of the same label set: everything replaced by the
/// matched ground truth (the ceiling), then one coordinate group at a time
/// kept predicted. The gap of each row below the ceiling measures how
/// much that group's errors cost.
#[derive(Debug, Clone, Serialize)]
pub struct SubstitutionTable {
    /// All coordinates from the matched ground truth.
    pub oracle_ap: f64,
    /// Predicted center, ground-truth size and heading.
    pub pred_localization_ap: f64,
    /// Predicted size, ground-truth center and heading.
    pub pred_size_ap: f64,
    /// Predicted heading, ground-truth center and size.
    pub pred_orientation_ap: f64,
}

/// Which coordinate group keeps its predicted value in a variant.
#[derive(Clone, Copy)]
enum Keep {
    Nothing,
    Localization,
    Size,
    Orientation,
}

/// Best-overlapping same-frame ground-truth box for each prediction, by
/// highest 3D IoU (> 0), ties to the lowest index.
fn best_overlap(preds: &[PredBox], gts: &[GtBox]) -> Vec<Option<usize>> {
    preds
        .iter()
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for (gi, g) in gts.iter().enumerate() {
                if g.frame != p.frame {
                    continue;
                }
                let iou = iou3d(&p.box7, &g.box7);
                if iou > 0.0 && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((gi, iou));
                }
            }
            best.map(|(gi, _)| gi)
        })
        .collect()
}

fn substitute(preds: &[PredBox], gts: &[GtBox], matched: &[Option<usize>], keep: Keep) -> Vec<PredBox> {
    preds
        .iter()
        .zip(matched)
        .map(|(p, m)| {
            let Some(gi) = m else { return p.clone() };
            let g = &gts[*gi].box7;
            let b = &p.box7;
            let (center, dims, heading) = match keep {
                Keep::Nothing => (g.center, [g.length, g.width, g.height], g.heading),
                Keep::Localization => (b.center, [g.length, g.width, g.height], g.heading),
                Keep::Size => (g.center, [b.length, b.width, b.height], g.heading),
                Keep::Orientation => (g.center, [g.length, g.width, g.height], b.heading),
            };
            let box7 = Box7::new(center, dims[0], dims[1], dims[2], heading)
                .expect("mixing coordinates of valid boxes yields a valid box");
            PredBox { frame: p.frame, box7, score: p.score }
        })
        .collect()
}

/// Re-scores `preds` with coordinate groups swapped to the ground truth of
/// each prediction's best-overlapping box (predictions without overlap
/// stay as they are), isolating the AP cost of localization, size and
/// orientation errors in turn.
pub fn oracle_substitution(preds: &[PredBox], gts: &[GtBox], iou_thresh: f64) -> SubstitutionTable {
    let matched = best_overlap(preds, gts);
    let ap = |keep| detection_eval(&substitute(preds, gts, &matched, keep), gts, iou_thresh).ap;
    SubstitutionTable {
        oracle_ap: ap(Keep::Nothing),
        pred_localization_ap: ap(Keep::Localization),
        pred_size_ap: ap(Keep::Size),
        pred_orientation_ap: ap(Keep::Orientation),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::PointStatus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(flows: Vec<Point3>) -> FlowField {
        let status = vec![PointStatus::Dynamic; flows.len()];
        FlowField { flows, status }
    }

    fn random_flows(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-scale..scale),
                    rng.gen_range(-scale..scale),
                    rng.gen_range(-scale..scale) * 0.1,
                )
            })
            .collect()
    }

    /// Brute-force re-implementation of every flow statistic, written as
    /// separate passes with its own class lookup, for cross-checking.
    fn naive_flow_eval(pred: &[Point3], gt: &[Point3], dt: f64, edges: &[f64]) -> FlowEval {
        let n = pred.len() as f64;
        let epe3d_m = pred.iter().zip(gt).map(|(a, b)| (*a - *b).norm()).sum::<f64>() / n;
        let accurate = |abs: f64, rel: f64| {
            pred.iter()
                .zip(gt)
                .filter(|(a, b)| {
                    let e = (**a - **b).norm();
                    e < abs || e / b.norm().max(1e-6) < rel
                })
                .count() as f64
                * 100.0
                / n
        };
        let angles: Vec<f64> = pred
            .iter()
            .zip(gt)
            .filter(|(a, b)| a.norm() >= 1e-6 && b.norm() >= 1e-6)
            .map(|(a, b)| (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos())
            .collect();
        let class_of = |v: &Point3| -> usize {
            let s = v.norm() / dt;
            let mut c = edges.len();
            for (i, e) in edges.iter().enumerate() {
                if s < *e {
                    c = i;
                    break;
                }
            }
            c
        };
        let mut bins = Vec::new();
        let (mut iou_sum, mut occupied) = (0.0, 0usize);
        for c in 0..=edges.len() {
            let tp = pred
                .iter()
                .zip(gt)
                .filter(|(a, b)| class_of(a) == c && class_of(b) == c)
                .count();
            let fp = pred
                .iter()
                .zip(gt)
                .filter(|(a, b)| class_of(a) == c && class_of(b) != c)
                .count();
            let fn_ = pred
                .iter()
                .zip(gt)
                .filter(|(a, b)| class_of(a) != c && class_of(b) == c)
                .count();
            let iou = if tp + fp + fn_ > 0 {
                iou_sum += tp as f64 / (tp + fp + fn_) as f64;
                occupied += 1;
                Some(tp as f64 / (tp + fp + fn_) as f64)
            } else {
                None
            };
            bins.push(SpeedBinIou {
                lo_mps: if c == 0 { 0.0 } else { edges[c - 1] },
                hi_mps: edges.get(c).copied(),
                tp,
                fp,
                fn_,
                iou,
            });
        }
        FlowEval {
            epe3d_m,
            acc5_pct: accurate(0.05, 0.05),
            acc10_pct: accurate(0.10, 0.10),
            theta_rad: if angles.is_empty() {
                0.0
            } else {
                angles.iter().sum::<f64>() / angles.len() as f64
            },
            bins,
            miou: iou_sum / occupied.max(1) as f64,
        }
    }

    #[test]
    fn perfect_prediction_scores_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gt = random_flows(&mut rng, 120, 1.5);
        let eval = flow_metrics(&field(gt.clone()), &gt, 0.1, &DEFAULT_SPEED_EDGES_MPS).unwrap();
        assert_eq!(eval.epe3d_m, 0.0);
        assert_eq!(eval.acc5_pct, 100.0);
        assert_eq!(eval.acc10_pct, 100.0);
        // acos of a rounded unit dot product is noisy at the 1e-8 scale.
        assert!(eval.theta_rad < 1e-7);
        assert_eq!(eval.miou, 1.0);
        for b in &eval.bins {
            assert!(b.iou.is_none() || b.iou == Some(1.0));
        }
    }

    #[test]
    fn missed_fast_point_charges_both_speed_classes() {
        // True flow 1 m over dt 0.1 (10 m/s, class 9-12); predicting zero
        // puts the point in class 0-3, costing one FP there and one FN in
        // the true class.
        let gt = vec![Point3::new(1.0, 0.0, 0.0)];
        let eval = flow_metrics(
            &field(vec![Point3::ZERO]),
            &gt,
            0.1,
            &DEFAULT_SPEED_EDGES_MPS,
        )
        .unwrap();
        assert_eq!(eval.epe3d_m, 1.0);
        assert_eq!(eval.acc5_pct, 0.0);
        assert_eq!(eval.acc10_pct, 0.0);
        assert_eq!((eval.bins[0].fp, eval.bins[0].fn_), (1, 0));
        assert_eq!((eval.bins[3].fp, eval.bins[3].fn_), (0, 1));
        assert_eq!(eval.miou, 0.0);
    }

    #[test]
    fn agrees_with_independent_evaluator_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let n = rng.gen_range(1..200);
            let gt = random_flows(&mut rng, n, 2.0);
            // Half the predictions close to truth, half independent.
            let pred: Vec<Point3> = gt
                .iter()
                .map(|g| {
                    if rng.gen_bool(0.5) {
                        *g + Point3::new(rng.gen_range(-0.05..0.05), 0.0, 0.0)
                    } else {
                        Point3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 0.0)
                    }
                })
                .collect();
            let dt = rng.gen_range(0.05..0.2);
            let ours =
                flow_metrics(&field(pred.clone()), &gt, dt, &DEFAULT_SPEED_EDGES_MPS).unwrap();
            let naive = naive_flow_eval(&pred, &gt, dt, &DEFAULT_SPEED_EDGES_MPS);
            assert!((ours.epe3d_m - naive.epe3d_m).abs() < 1e-12);
            assert!((ours.acc5_pct - naive.acc5_pct).abs() < 1e-12);
            assert!((ours.acc10_pct - naive.acc10_pct).abs() < 1e-12);
            assert!((ours.theta_rad - naive.theta_rad).abs() < 1e-12);
            assert!((ours.miou - naive.miou).abs() < 1e-12);
            let (mut tps, mut fps, mut fns) = (0, 0, 0);
            for (a, b) in ours.bins.iter().zip(&naive.bins) {
                assert_eq!((a.tp, a.fp, a.fn_), (b.tp, b.fp, b.fn_));
                tps += a.tp;
                fps += a.fp;
                fns += a.fn_;
            }
            // Confusion counts partition the points.
            assert_eq!(tps + fps, n);
            assert_eq!(tps + fns, n);
            assert!(ours.acc5_pct <= ours.acc10_pct);
        }
    }

    #[test]
    fn scaling_preserves_relative_accuracy_and_angle() {
        // With end-point errors far above the absolute thresholds, the
        // accuracies are decided by the relative branch alone, which is
        // scale-free, as is the angle.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt = random_flows(&mut rng, 80, 3.0);
        let pred: Vec<Point3> = gt
            .iter()
            .map(|g| *g + Point3::new(rng.gen_range(0.2..0.5), rng.gen_range(0.2..0.5), 0.0))
            .collect();
        let base = flow_metrics(&field(pred.clone()), &gt, 0.1, &[3.0]).unwrap();
        for s in [2.0, 17.0, 400.0] {
            let pred_s: Vec<Point3> = pred.iter().map(|p| *p * s).collect();
            let gt_s: Vec<Point3> = gt.iter().map(|p| *p * s).collect();
            let scaled = flow_metrics(&field(pred_s), &gt_s, 0.1, &[3.0]).unwrap();
            assert_eq!(scaled.acc5_pct, base.acc5_pct);
            assert_eq!(scaled.acc10_pct, base.acc10_pct);
            assert!((scaled.theta_rad - base.theta_rad).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let gt = vec![Point3::ZERO];
        assert!(matches!(
            flow_metrics(&field(vec![]), &gt, 0.1, &[3.0]),
            Err(MetricsError::MisalignedLengths { pred: 0, gt: 1 })
        ));
        assert!(matches!(
            flow_metrics(&field(vec![]), &[], 0.1, &[3.0]),
            Err(MetricsError::Empty)
        ));
        assert!(matches!(
            flow_metrics(&field(vec![Point3::ZERO]), &gt, 0.0, &[3.0]),
            Err(MetricsError::BadTimeStep(_))
        ));
        assert!(matches!(
            flow_metrics(&field(vec![Point3::ZERO]), &gt, 0.1, &[6.0, 3.0]),
            Err(MetricsError::BadEdges(_))
        ));
    }

    fn boxed(x: f64, y: f64, l: f64, w: f64, heading: f64) -> Box7 {
        Box7::new(Point3::new(x, y, 1.0), l, w, 2.0, heading).unwrap()
    }

    fn random_boxes(rng: &mut ChaCha8Rng, n: usize, frames: usize) -> Vec<(usize, Box7)> {
        (0..n)
            .map(|_| {
                (
                    rng.gen_range(0..frames),
                    boxed(
                        rng.gen_range(-8.0..8.0),
                        rng.gen_range(-8.0..8.0),
                        rng.gen_range(1.0..5.0),
                        rng.gen_range(1.0..3.0),
                        rng.gen_range(-3.0..3.0),
                    ),
                )
            })
            .collect()
    }

    /// AP recomputed from scratch: for every prefix of the score order the
    /// greedy matching is rerun in full, and the envelope is integrated by
    /// a quadratic scan instead of a suffix pass.
    fn ap_by_prefix_rescoring(preds: &[PredBox], gts: &[GtBox], thresh: f64) -> f64 {
        let order = score_order(preds);
        let mut points = Vec::new();
        for k in 1..=order.len() {
            let prefix: Vec<PredBox> = order[..k].iter().map(|&i| preds[i].clone()).collect();
            let mut taken = vec![false; gts.len()];
            let mut tp = 0;
            for p in &prefix {
                let mut best: Option<(usize, f64)> = None;
                for (gi, g) in gts.iter().enumerate() {
                    if g.frame != p.frame || taken[gi] {
                        continue;
                    }
                    let iou = iou3d(&p.box7, &g.box7);
                    if iou >= thresh && best.is_none_or(|(_, b)| iou > b) {
                        best = Some((gi, iou));
                    }
                }
                if let Some((gi, _)) = best {
                    taken[gi] = true;
                    tp += 1;
                }
            }
            let recall = if gts.is_empty() { 0.0 } else { tp as f64 / gts.len() as f64 };
            points.push((recall, tp as f64 / k as f64));
        }
        let mut ap = 0.0;
        let mut prev = 0.0;
        for (i, (r, _)) in points.iter().enumerate() {
            let envelope = points[i..]
                .iter()
                .map(|(_, p)| *p)
                .fold(0.0, f64::max);
            ap += (r - prev).max(0.0) * envelope;
            prev = *r;
        }
        ap
    }

    #[test]
    fn exact_match_is_a_perfect_detection() {
        let b = boxed(1.0, 2.0, 4.0, 2.0, 0.3);
        let eval = detection_eval(
            &[PredBox { frame: 0, box7: b, score: None }],
            &[GtBox { frame: 0, box7: b }],
            0.4,
        );
        assert_eq!((eval.precision, eval.recall, eval.ap), (1.0, 1.0, 1.0));
        assert_eq!(eval.errors.len(), 1);
        let e = eval.errors[0];
        assert_eq!((e.loc_m, e.size_m, e.orient_rad), (0.0, 0.0, 0.0));
    }

    #[test]
    fn prediction_without_ground_truth_scores_zero() {
        let eval = detection_eval(
            &[PredBox { frame: 0, box7: boxed(0.0, 0.0, 2.0, 1.0, 0.0), score: None }],
            &[],
            0.4,
        );
        assert_eq!((eval.precision, eval.recall, eval.ap), (0.0, 0.0, 0.0));
        assert_eq!((eval.tp, eval.fp, eval.fn_), (0, 1, 0));
    }

    #[test]
    fn ap_matches_prefix_rescoring_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let preds: Vec<PredBox> = random_boxes(&mut rng, 20, 3)
                .into_iter()
                .map(|(frame, box7)| PredBox {
                    frame,
                    box7,
                    score: Some(rng.gen_range(0.0..1.0)),
                })
                .collect();
            let gts: Vec<GtBox> = random_boxes(&mut rng, 10, 3)
                .into_iter()
                .map(|(frame, box7)| GtBox { frame, box7 })
                .collect();
            let eval = detection_eval(&preds, &gts, 0.4);
            let oracle = ap_by_prefix_rescoring(&preds, &gts, 0.4);
            assert!((eval.ap - oracle).abs() < 1e-12, "{} vs {}", eval.ap, oracle);
        }
    }

    #[test]
    fn tied_scores_resolve_by_frame_then_index() {
        let g = boxed(0.0, 0.0, 4.0, 2.0, 0.0);
        // Both unscored; the frame-1 box (listed first) misses, the
        // frame-0 box hits. Frame order must process the hit first.
        let preds = vec![
            PredBox { frame: 1, box7: boxed(50.0, 50.0, 4.0, 2.0, 0.0), score: None },
            PredBox { frame: 0, box7: g, score: None },
        ];
        let eval = detection_eval(&preds, &[GtBox { frame: 0, box7: g }], 0.4);
        assert_eq!(eval.pr_curve[0].recall, 1.0);
        assert_eq!(eval.pr_curve[0].precision, 1.0);
        assert_eq!(eval.pr_curve[1].precision, 0.5);
    }

    #[test]
    fn adding_a_top_scored_true_positive_never_lowers_ap() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let preds: Vec<PredBox> = random_boxes(&mut rng, 8, 2)
                .into_iter()
                .map(|(frame, box7)| PredBox {
                    frame,
                    box7,
                    score: Some(rng.gen_range(0.0..0.9)),
                })
                .collect();
            let gts: Vec<GtBox> = random_boxes(&mut rng, 6, 2)
                .into_iter()
                .map(|(frame, box7)| GtBox { frame, box7 })
                .collect();
            let base = detection_eval(&preds, &gts, 0.4).ap;
            // Duplicate an arbitrary ground-truth box as a new top-scored
            // prediction; it always matches something.
            let g = &gts[rng.gen_range(0..gts.len())];
            let mut extended = preds.clone();
            extended.push(PredBox { frame: g.frame, box7: g.box7, score: Some(1.0) });
            let with_tp = detection_eval(&extended, &gts, 0.4).ap;
            assert!(with_tp >= base - 1e-12, "{with_tp} < {base}");
        }
    }

    #[test]
    fn substitution_rows_coincide_for_perfect_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gts: Vec<GtBox> = random_boxes(&mut rng, 6, 2)
            .into_iter()
            .map(|(frame, box7)| GtBox { frame, box7 })
            .collect();
        let preds: Vec<PredBox> = gts
            .iter()
            .map(|g| PredBox { frame: g.frame, box7: g.box7, score: None })
            .collect();
        let table = oracle_substitution(&preds, &gts, 0.4);
        assert_eq!(table.oracle_ap, table.pred_localization_ap);
        assert_eq!(table.oracle_ap, table.pred_size_ap);
        assert_eq!(table.oracle_ap, table.pred_orientation_ap);
    }

    #[test]
    fn center_noise_degrades_only_the_localization_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gts: Vec<GtBox> = (0..8)
            .map(|i| GtBox {
                frame: i / 4,
                box7: boxed(6.0 * (i % 4) as f64, 3.0 * (i / 4) as f64, 4.0, 2.0, 0.4),
            })
            .collect();
        // Shifts large enough to drop the match below the 0.4 threshold
        // while the boxes still overlap.
        let preds: Vec<PredBox> = gts
            .iter()
            .map(|g| {
                let mut b = g.box7;
                b.center.x += rng.gen_range(1.6..2.0);
                b.center.y += rng.gen_range(0.8..1.0);
                PredBox { frame: g.frame, box7: b, score: None }
            })
            .collect();
        let table = oracle_substitution(&preds, &gts, 0.4);
        assert_eq!(table.oracle_ap, 1.0);
        assert_eq!(table.pred_size_ap, 1.0);
        assert_eq!(table.pred_orientation_ap, 1.0);
        assert!(table.pred_localization_ap < 1.0, "{}", table.pred_localization_ap);
    }
}
