//! Classification of detected pipes against the planned bill of quantities,
//! accuracy metrics, and progress report generation.

mod accuracy;
mod registration;
mod report;

pub use accuracy::{cloud_accuracy, CloudAccuracy, CloudAccuracyOptions};
pub use registration::{register_similarity, SimilarityTransform};
pub use report::{
    build_report, classify_cylinders, report_to_csv, ClassReportRow, ClassifiedPipe,
    ProgressReport, ReportMeta, ReportTotals,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One planned pipe class from the bill of quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct PipeClass {
    pub id: u32,
    pub label: String,
    pub outer_radius_m: f64,
    pub material: String,
}

/// Planned pipe classes, ordered by outer radius.
#[derive(Debug, Clone, PartialEq)]
pub struct PipeClassTable {
    pub classes: Vec<PipeClass>,
}

impl PipeClassTable {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidInput("class table is empty".into()));
        }
        for c in &self.classes {
            if !(c.outer_radius_m > 0.0 && c.outer_radius_m.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "class {}: radius {} must be positive",
                    c.id, c.outer_radius_m
                )));
            }
        }
        for w in self.classes.windows(2) {
            if w[1].outer_radius_m <= w[0].outer_radius_m {
                return Err(Error::InvalidInput(format!(
                    "class radii must be strictly increasing: {} then {}",
                    w[0].outer_radius_m, w[1].outer_radius_m
                )));
            }
        }
        let mut ids: Vec<u32> = self.classes.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.classes.len() {
            return Err(Error::InvalidInput("duplicate class ids".into()));
        }
        Ok(())
    }

    pub fn class(&self, id: u32) -> Option<&PipeClass> {
        self.classes.iter().find(|c| c.id == id)
    }
}

/// On-disk shape: radii in millimeters.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassTableFile {
    classes: Vec<ClassFileEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassFileEntry {
    id: u32,
    label: String,
    outer_radius_mm: f64,
    material: String,
}

pub fn read_class_table(path: &Path) -> Result<PipeClassTable> {
    let text = std::fs::read_to_string(path)?;
    let file: ClassTableFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let table = PipeClassTable {
        classes: file
            .classes
            .into_iter()
            .map(|c| PipeClass {
                id: c.id,
                label: c.label,
                outer_radius_m: c.outer_radius_mm / 1000.0,
                material: c.material,
            })
            .collect(),
    };
    table.validate()?;
    Ok(table)
}

pub fn write_class_table(path: &Path, table: &PipeClassTable) -> Result<()> {
    table.validate()?;
    let file = ClassTableFile {
        classes: table
            .classes
            .iter()
            .map(|c| ClassFileEntry {
                id: c.id,
                label: c.label.clone(),
                outer_radius_mm: c.outer_radius_m * 1000.0,
                material: c.material.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("table serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn nearest_mean(r: f64, means: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = (r - means[0]).abs();
    for (k, &m) in means.iter().enumerate().skip(1) {
        let d = (r - m).abs();
        // Strict improvement only: ties stay with the smaller class.
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

/// Assign estimated radii to planned classes by k-means seeded at the
/// planned outer radii.
///
/// Lloyd iterations run to an assignment fixpoint (at most 100 rounds); a
/// cluster that loses all members falls back to its seed mean so unused
/// classes survive. Returns one class id per input radius.
pub fn classify_kmeans(radii: &[f64], table: &PipeClassTable) -> Result<Vec<u32>> {
    table.validate()?;
    if radii.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(&r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidInput(format!("radius {r} must be positive")));
    }
    let seeds: Vec<f64> = table.classes.iter().map(|c| c.outer_radius_m).collect();
    let mut means = seeds.clone();
    let mut assign: Vec<usize> = radii.iter().map(|&r| nearest_mean(r, &means)).collect();
    for _ in 0..100 {
        let mut sums = vec![0.0; means.len()];
        let mut counts = vec![0usize; means.len()];
        for (&r, &k) in radii.iter().zip(&assign) {
            sums[k] += r;
            counts[k] += 1;
        }
        for k in 0..means.len() {
            means[k] = if counts[k] > 0 { sums[k] / counts[k] as f64 } else { seeds[k] };
        }
        let next: Vec<usize> = radii.iter().map(|&r| nearest_mean(r, &means)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    Ok(assign.into_iter().map(|k| table.classes[k].id).collect())
}

/// Root mean squared radius residual over (estimate, truth) pairs, meters.
pub fn radius_rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }
    let sum_sq: f64 = pairs.iter().map(|(est, truth)| (est - truth).powi(2)).sum();
    Ok((sum_sq / pairs.len() as f64).sqrt())
}

/// Length error as a percentage of the true length.
pub fn length_percent_error(l_est: f64, l_true: f64) -> Result<f64> {
    if l_true <= 0.0 || !l_true.is_finite() {
        return Err(Error::ZeroTruth);
    }
    Ok((1.0 - l_est / l_true).abs() * 100.0)
}

/// Confusion-matrix counts. The true-negative count rarely exists for
/// detection tasks, so it is optional; accuracy is only computed with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_negative: Option<u64>,
}

/// Quality figures in [0, 1]. A metric whose denominator is zero is `None`
/// (serialized as null), never silently 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionQuality {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
    pub accuracy: Option<f64>,
}

pub fn detection_quality(counts: &DetectionCounts) -> DetectionQuality {
    let tp = counts.true_positive as f64;
    let fp = counts.false_positive as f64;
    let fneg = counts.false_negative as f64;
    let precision = (tp + fp > 0.0).then(|| tp / (tp + fp));
    let recall = (tp + fneg > 0.0).then(|| tp / (tp + fneg));
    let f_measure = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let accuracy = counts.true_negative.and_then(|tn| {
        let total = tp + tn as f64 + fp + fneg;
        (total > 0.0).then(|| (tp + tn as f64) / total)
    });
    DetectionQuality { precision, recall, f_measure, accuracy }
}

#[cfg(test)]
pub(crate) fn test_table(radii_mm: &[f64]) -> PipeClassTable {
    PipeClassTable {
        classes: radii_mm
            .iter()
            .enumerate()
            .map(|(i, &r)| PipeClass {
                id: i as u32 + 1,
                label: format!("C{}", i + 1),
                outer_radius_m: r / 1000.0,
                material: "steel".into(),
            })
            .collect(),
    }
}
