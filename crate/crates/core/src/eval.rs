//! One-pass evaluation: center-error precision and overlap success.

use std::fmt::Write as _;
use std::path::Path;

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};

/// Distance thresholds 0, 1, ..., 50 px.
pub const PRECISION_THRESHOLDS: usize = 51;
/// Overlap thresholds 0, 0.05, ..., 1.
pub const SUCCESS_THRESHOLDS: usize = 21;
pub const PRECISION_SCORE_PX: usize = 20;

pub fn center_error(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let (a, b) = (pred.center(), gt.center());
    (a.0 - b.0).hypot(a.1 - b.1)
}

pub fn precision_thresholds() -> Vec<f64> {
    (0..PRECISION_THRESHOLDS).map(|t| t as f64).collect()
}

pub fn success_thresholds() -> Vec<f64> {
    (0..SUCCESS_THRESHOLDS).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub precision: Curve,
    pub success: Curve,
    /// Precision at 20 px.
    pub precision_score: f64,
    /// Mean of the success curve.
    pub auc: f64,
    /// Frames used after dropping absent ground truth.
    pub frames_used: usize,
    pub frames_skipped: usize,
}

/// Frame pairs whose ground truth is not the all-zero absent marker.
fn present_pairs<'a>(preds: &'a [BoundingBox], gts: &'a [BoundingBox]) -> Result<(Vec<(&'a BoundingBox, &'a BoundingBox)>, usize)> {
    if preds.len() != gts.len() {
        return Err(Error::DimensionMismatch(format!("{} predictions vs {} ground-truth boxes", preds.len(), gts.len())));
    }
    let pairs: Vec<_> = preds.iter().zip(gts).filter(|(_, g)| !g.is_absent()).collect();
    let skipped = preds.len() - pairs.len();
    Ok((pairs, skipped))
}

fn fraction(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

/// Fraction of frames with center error `≤ t` for each threshold, and the
/// value at 20 px.
pub fn precision_curve(preds: &[BoundingBox], gts: &[BoundingBox]) -> Result<(Curve, f64)> {
    let (pairs, _) = present_pairs(preds, gts)?;
    let errors: Vec<f64> = pairs.iter().map(|(p, g)| center_error(p, g)).collect();
    let thresholds = precision_thresholds();
    let values: Vec<f64> = thresholds
        .iter()
        .map(|t| fraction(errors.iter().filter(|e| **e <= *t).count(), errors.len()))
        .collect();
    let score = values[PRECISION_SCORE_PX];
    Ok((Curve { thresholds, values }, score))
}

/// Fraction of frames with IOU strictly above each threshold, and the curve mean.
pub fn success_curve(preds: &[BoundingBox], gts: &[BoundingBox]) -> Result<(Curve, f64)> {
    let (pairs, _) = present_pairs(preds, gts)?;
    let overlaps: Vec<f64> = pairs.iter().map(|(p, g)| p.iou(g)).collect();
    let thresholds = success_thresholds();
    let values: Vec<f64> = thresholds
        .iter()
        .map(|t| fraction(overlaps.iter().filter(|o| **o > *t).count(), overlaps.len()))
        .collect();
    let auc = values.iter().sum::<f64>() / values.len() as f64;
    Ok((Curve { thresholds, values }, auc))
}

pub fn evaluate(preds: &[BoundingBox], gts: &[BoundingBox]) -> Result<Evaluation> {
    let (pairs, frames_skipped) = present_pairs(preds, gts)?;
    let (precision, precision_score) = precision_curve(preds, gts)?;
    let (success, auc) = success_curve(preds, gts)?;
    Ok(Evaluation { precision, success, precision_score, auc, frames_used: pairs.len(), frames_skipped })
}

fn curve_csv(header: &str, curve: &Curve) -> String {
    let mut out = format!("{header},value\n");
    for (t, v) in curve.thresholds.iter().zip(&curve.values) {
        let _ = writeln!(out, "{t:.2},{v:.6}");
    }
    out
}

impl Evaluation {
    pub fn precision_csv(&self) -> String {
        curve_csv("threshold_px", &self.precision)
    }

    pub fn success_csv(&self) -> String {
        curve_csv("threshold_iou", &self.success)
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "precision@20,auc,frames,skipped\n{:.6},{:.6},{},{}\n",
            self.precision_score, self.auc, self.frames_used, self.frames_skipped
        )
    }

    /// Writes `precision.csv`, `success.csv` and `summary.csv` into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("precision.csv"), self.precision_csv())?;
        std::fs::write(dir.join("success.csv"), self.success_csv())?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        Ok(())
    }
}
