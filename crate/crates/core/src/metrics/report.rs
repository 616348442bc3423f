//! Aggregated evaluation report with JSON and CSV serialization.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{DetEval, FlowEval, MetricsError, SubstitutionTable};

/// Binned counts of an error distribution over a fixed range.
/// Out-of-range samples clamp into the edge bins so every one is counted.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, nbins: usize, values: impl IntoIterator<Item = f64>) -> Histogram {
        let nbins = nbins.max(1);
        let width = (hi - lo) / nbins as f64;
        let mut counts = vec![0usize; nbins];
        for v in values {
            let idx = (((v - lo) / width).floor() as isize).clamp(0, nbins as isize - 1);
            counts[idx as usize] += 1;
        }
        Histogram { lo, hi, counts }
    }

    fn bin_edges(&self, i: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + width * i as f64, self.lo + width * (i + 1) as f64)
    }
}

/// Distributions of the per-pair box errors: center distance and size
/// error over [0, 2] m, heading error over a full wrap.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorHistograms {
    pub localization_m: Histogram,
    pub size_m: Histogram,
    pub orientation_rad: Histogram,
}

impl ErrorHistograms {
    pub fn from_detection(det: &DetEval) -> ErrorHistograms {
        ErrorHistograms {
            localization_m: Histogram::new(0.0, 2.0, 20, det.errors.iter().map(|e| e.loc_m)),
            size_m: Histogram::new(0.0, 2.0, 20, det.errors.iter().map(|e| e.size_m)),
            orientation_rad: Histogram::new(
                -std::f64::consts::PI,
                std::f64::consts::PI,
                24,
                det.errors.iter().map(|e| e.orient_rad),
            ),
        }
    }
}

/// Everything one evaluation run produces: flow quality with its speed
/// breakdown, detection precision/recall/AP, the coordinate-substitution
/// table, and binned error distributions.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub flow: Option<FlowEval>,
    pub detection: DetEval,
    pub substitution: SubstitutionTable,
    pub histograms: ErrorHistograms,
}

impl EvalReport {
    /// Assembles a report; `flow` is optional because labels can be
    /// evaluated against ground truth without stored flow fields.
    pub fn new(flow: Option<FlowEval>, detection: DetEval, substitution: SubstitutionTable) -> EvalReport {
        let histograms = ErrorHistograms::from_detection(&detection);
        EvalReport { flow, detection, substitution, histograms }
    }

    pub fn write_json(&self, path: &Path) -> Result<(), MetricsError> {
        let body = serde_json::to_string_pretty(self)?;
        fs::write(path, body + "\n")
            .map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })
    }

    /// Precision-recall curve as `recall,precision` rows.
    pub fn write_pr_csv(&self, path: &Path) -> Result<(), MetricsError> {
        let mut body = String::from("recall,precision\n");
        for p in &self.detection.pr_curve {
            body.push_str(&format!("{},{}\n", p.recall, p.precision));
        }
        fs::write(path, body)
            .map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })
    }

    /// Error histograms as `metric,bin_lo,bin_hi,count` rows.
    pub fn write_histogram_csv(&self, path: &Path) -> Result<(), MetricsError> {
        let mut body = String::from("metric,bin_lo,bin_hi,count\n");
        for (name, h) in [
            ("localization_m", &self.histograms.localization_m),
            ("size_m", &self.histograms.size_m),
            ("orientation_rad", &self.histograms.orientation_rad),
        ] {
            for (i, c) in h.counts.iter().enumerate() {
                let (lo, hi) = h.bin_edges(i);
                body.push_str(&format!("{name},{lo},{hi},{c}\n"));
            }
        }
        fs::write(path, body)
            .map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })
    }
}
