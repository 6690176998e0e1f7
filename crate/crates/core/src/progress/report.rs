use serde::{Deserialize, Serialize};

use crate::cylinder::CylinderModel;
use crate::io::GroundTruthRow;
use crate::{Error, Result};

use super::{
    classify_kmeans, detection_quality, length_percent_error, DetectionCounts, DetectionQuality,
    PipeClassTable,
};

/// A detected cylinder with its bill-of-quantities class.
///
/// `pipe_id` links the detection to ground truth; `classify_cylinders`
/// numbers pipes by detection order, which callers can remap when an
/// external id scheme exists.
#[derive(Debug, Clone)]
pub struct ClassifiedPipe {
    pub pipe_id: u32,
    pub cylinder: CylinderModel,
    pub class_id: u32,
    /// Estimated radius minus the planned radius of the assigned class.
    pub radius_residual_m: f64,
}

pub fn classify_cylinders(
    cylinders: &[CylinderModel],
    table: &PipeClassTable,
) -> Result<Vec<ClassifiedPipe>> {
    let radii: Vec<f64> = cylinders.iter().map(|c| c.radius).collect();
    let classes = classify_kmeans(&radii, table)?;
    Ok(cylinders
        .iter()
        .zip(classes)
        .enumerate()
        .map(|(i, (cyl, class_id))| {
            let planned = table.class(class_id).expect("assigned class exists").outer_radius_m;
            ClassifiedPipe {
                pipe_id: i as u32,
                cylinder: cyl.clone(),
                class_id,
                radius_residual_m: cyl.radius - planned,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub generated_at: String,
    pub tool_version: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReportRow {
    pub class_id: u32,
    pub label: String,
    pub planned_radius_mm: f64,
    pub material: String,
    pub detected_count: usize,
    pub total_length_m: f64,
    /// Signed mean of (estimated - true) radius over matched pipes, mm.
    pub mean_radius_error_mm: Option<f64>,
    pub radius_rmse_mm: Option<f64>,
    pub mean_length_error_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTotals {
    pub detected_count: usize,
    pub total_length_m: f64,
    pub radius_rmse_mm: Option<f64>,
    pub mean_length_error_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub meta: ReportMeta,
    pub classes: Vec<ClassReportRow>,
    pub totals: ReportTotals,
    /// Present only when ground truth was supplied.
    pub quality: Option<DetectionQuality>,
}

/// Aggregate classified pipes into per-class rows plus totals.
///
/// With ground truth, detections are matched to truth rows by pipe id; the
/// first detection claiming an id is the true positive, every further
/// claim and every unmatched detection counts as a false positive, and
/// unclaimed truth rows count as false negatives. Without ground truth the
/// report carries counts and lengths only.
pub fn build_report(
    pipes: &[ClassifiedPipe],
    table: &PipeClassTable,
    truth: Option<&[GroundTruthRow]>,
    meta: ReportMeta,
) -> Result<ProgressReport> {
    table.validate()?;
    for p in pipes {
        if table.class(p.class_id).is_none() {
            return Err(Error::InvalidInput(format!(
                "pipe {} assigned to unknown class {}",
                p.pipe_id, p.class_id
            )));
        }
    }

    // Match detections to truth by pipe id, first claim wins.
    let mut matched: Vec<Option<&GroundTruthRow>> = vec![None; pipes.len()];
    let mut false_negative = 0u64;
    if let Some(rows) = truth {
        let mut claimed = vec![false; rows.len()];
        for (i, p) in pipes.iter().enumerate() {
            if let Some(j) = rows
                .iter()
                .position(|r| r.pipe_id == p.pipe_id)
                .filter(|&j| !claimed[j])
            {
                claimed[j] = true;
                matched[i] = Some(&rows[j]);
            }
        }
        false_negative = claimed.iter().filter(|c| !**c).count() as u64;
    }

    let mut classes = Vec::with_capacity(table.classes.len());
    let mut all_radius_pairs: Vec<(f64, f64)> = Vec::new();
    let mut all_length_errors: Vec<f64> = Vec::new();
    for class in &table.classes {
        let members: Vec<(usize, &ClassifiedPipe)> = pipes
            .iter()
            .enumerate()
            .filter(|(_, p)| p.class_id == class.id)
            .collect();
        let total_length_m = members.iter().map(|(_, p)| p.cylinder.length).sum();

        let mut radius_pairs = Vec::new();
        let mut length_errors = Vec::new();
        for (i, p) in &members {
            if let Some(row) = matched[*i] {
                radius_pairs.push((p.cylinder.radius, row.true_radius_mm / 1000.0));
                length_errors.push(length_percent_error(p.cylinder.length, row.true_length_m)?);
            }
        }
        let mean_radius_error_mm = (!radius_pairs.is_empty()).then(|| {
            radius_pairs.iter().map(|(e, t)| (e - t) * 1000.0).sum::<f64>()
                / radius_pairs.len() as f64
        });
        let radius_rmse_mm = (!radius_pairs.is_empty())
            .then(|| super::radius_rmse(&radius_pairs).expect("non-empty") * 1000.0);
        let mean_length_error_percent = (!length_errors.is_empty())
            .then(|| length_errors.iter().sum::<f64>() / length_errors.len() as f64);

        all_radius_pairs.extend(&radius_pairs);
        all_length_errors.extend(&length_errors);
        classes.push(ClassReportRow {
            class_id: class.id,
            label: class.label.clone(),
            planned_radius_mm: class.outer_radius_m * 1000.0,
            material: class.material.clone(),
            detected_count: members.len(),
            total_length_m,
            mean_radius_error_mm,
            radius_rmse_mm,
            mean_length_error_percent,
        });
    }

    let totals = ReportTotals {
        detected_count: classes.iter().map(|c| c.detected_count).sum(),
        total_length_m: classes.iter().map(|c| c.total_length_m).sum(),
        radius_rmse_mm: (!all_radius_pairs.is_empty())
            .then(|| super::radius_rmse(&all_radius_pairs).expect("non-empty") * 1000.0),
        mean_length_error_percent: (!all_length_errors.is_empty())
            .then(|| all_length_errors.iter().sum::<f64>() / all_length_errors.len() as f64),
    };

    let quality = truth.map(|_| {
        let tp = matched.iter().filter(|m| m.is_some()).count() as u64;
        detection_quality(&DetectionCounts {
            true_positive: tp,
            false_positive: pipes.len() as u64 - tp,
            false_negative,
            true_negative: None,
        })
    });

    Ok(ProgressReport { meta, classes, totals, quality })
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_default()
}

/// Per-class rows plus a trailing `total` row; empty cells where ground
/// truth was unavailable.
pub fn report_to_csv(report: &ProgressReport) -> String {
    let mut out = String::from(
        "class_id,label,planned_radius_mm,material,detected_count,total_length_m,\
         mean_radius_error_mm,radius_rmse_mm,mean_length_error_percent\n",
    );
    for row in &report.classes {
        out.push_str(&format!(
            "{},{},{:.4},{},{},{:.4},{},{},{}\n",
            row.class_id,
            csv_field(&row.label),
            row.planned_radius_mm,
            csv_field(&row.material),
            row.detected_count,
            row.total_length_m,
            csv_opt(row.mean_radius_error_mm),
            csv_opt(row.radius_rmse_mm),
            csv_opt(row.mean_length_error_percent),
        ));
    }
    out.push_str(&format!(
        "total,,,,{},{:.4},,{},{}\n",
        report.totals.detected_count,
        report.totals.total_length_m,
        csv_opt(report.totals.radius_rmse_mm),
        csv_opt(report.totals.mean_length_error_percent),
    ));
    out
}
