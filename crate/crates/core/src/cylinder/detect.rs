//! End-to-end detection: slab, segment, fit, recover, disambiguate, refine,
//! measure, and merge duplicates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    disambiguate_axis, gate_interest_points, measure_length, recover_from_ellipse, refine_cylinder,
    slab_select, CylinderModel, LengthMode, SeedPlaneSpec,
};
use crate::ellipse::{
    connected_components_2d, fit_ellipse, validate_ellipse, EllipseGateConfig, EllipseRejection,
};
use crate::geom::{rotation_aligning, Point2, PointCloud, UnitState, UnitVec3, Vec3};
use crate::Result;

/// Tunables of the detection pipeline. Defaults follow the method: 1 cm
/// slab and grid cell, 50-point support floor, 75 degree tilt cap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectConfig {
    pub slab_half_width_m: f64,
    /// Occupancy-grid cell for 2D connected components.
    pub cell_size_m: f64,
    pub gate: EllipseGateConfig,
    /// Minimum gated support for disambiguation and refinement.
    pub min_support: usize,
    /// Sections steeper than this are rejected as ill-conditioned.
    pub max_delta_deg: f64,
    /// Models with axes within this angle and axis separation below the
    /// larger radius are considered the same pipe.
    pub merge_axis_deg: f64,
    pub length_mode: LengthMode,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            slab_half_width_m: 0.01,
            cell_size_m: 0.01,
            gate: EllipseGateConfig::default(),
            min_support: 50,
            max_delta_deg: 75.0,
            merge_axis_deg: 2.0,
            length_mode: LengthMode::TrimmedPercentile,
        }
    }
}

/// What happened to one slab segment.
#[derive(Debug, Clone, Serialize)]
pub enum SegmentOutcome {
    /// Survived the full pipeline; index into `Detection::models`.
    Accepted { model: usize },
    RejectedEllipse(EllipseRejection),
    FitFailed { message: String },
    /// Section tilt above the configured cap.
    TiltTooSteep { delta_deg: f64 },
    InsufficientSupport { needed: usize, got: usize },
    RefineFailed { message: String },
    /// Duplicate of another accepted model.
    MergedInto { model: usize },
}

/// Per-segment record of the pipeline decision.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentDiagnostic {
    pub segment: usize,
    pub point_count: usize,
    pub outcome: SegmentOutcome,
}

/// Detection result: accepted models plus per-segment diagnostics.
#[derive(Debug, Clone)]
pub struct Detection {
    pub models: Vec<CylinderModel>,
    pub diagnostics: Vec<SegmentDiagnostic>,
    /// Set when the input cloud was not in metric units; radii and gating
    /// thresholds are then not meaningful in meters.
    pub arbitrary_units: bool,
}

enum Candidate {
    Model(CylinderModel),
    Rejected(SegmentOutcome),
}

/// Run the full detection pipeline against one seed plane.
pub fn detect_all(
    cloud: &PointCloud,
    seed: &SeedPlaneSpec,
    config: &DetectConfig,
) -> Result<Detection> {
    let plane = seed.resolve()?;
    let slab = slab_select(cloud, &plane, config.slab_half_width_m)?;

    // Project the slab into the rotated plane frame, keeping each point's
    // signed offset from the plane for sub-slab refits.
    let rot = rotation_aligning(&plane.normal, &UnitVec3::new_unchecked(Vec3::z()));
    let mut planar = Vec::with_capacity(slab.len());
    let mut offsets = Vec::with_capacity(slab.len());
    for &i in &slab {
        let q = rot * cloud.points[i].coords;
        planar.push(Point2::new(q.x, q.y));
        offsets.push(q.z + plane.d);
    }
    let segments = connected_components_2d(&planar, config.cell_size_m)?;

    let candidates: Vec<(usize, usize, Candidate)> = segments
        .par_iter()
        .enumerate()
        .map(|(si, seg)| {
            let pts: Vec<Point2> = seg.indices.iter().map(|&i| planar[i]).collect();
            let offs: Vec<f64> = seg.indices.iter().map(|&i| offsets[i]).collect();
            (si, seg.len(), process_segment(cloud, &pts, &offs, &plane, config))
        })
        .collect();

    // Deterministic merge: accept in segment order, larger-support model
    // wins on duplicates.
    let mut models: Vec<CylinderModel> = Vec::new();
    let mut diagnostics = Vec::with_capacity(candidates.len());
    for (si, count, cand) in candidates {
        let outcome = match cand {
            Candidate::Rejected(o) => o,
            Candidate::Model(mut m) => {
                match models.iter().position(|kept| is_duplicate(kept, &m, config)) {
                    Some(k) => {
                        if m.inliers.len() > models[k].inliers.len() {
                            std::mem::swap(&mut models[k], &mut m);
                        }
                        SegmentOutcome::MergedInto { model: k }
                    }
                    None => {
                        models.push(m);
                        SegmentOutcome::Accepted { model: models.len() - 1 }
                    }
                }
            }
        };
        diagnostics.push(SegmentDiagnostic { segment: si, point_count: count, outcome });
    }

    Ok(Detection {
        models,
        diagnostics,
        arbitrary_units: cloud.unit_state == UnitState::Arbitrary,
    })
}

/// Fit and gate one set of section points, ending with a cylinder
/// hypothesis or the outcome that rejected it.
fn section_hypothesis(
    pts: &[Point2],
    plane: &crate::geom::Plane,
    config: &DetectConfig,
) -> std::result::Result<super::EllipseRecovery, SegmentOutcome> {
    let fit = fit_ellipse(pts)
        .map_err(|e| SegmentOutcome::FitFailed { message: e.to_string() })?;
    if let Some(reason) = validate_ellipse(&fit, pts.len(), &config.gate) {
        return Err(SegmentOutcome::RejectedEllipse(reason));
    }
    let recovery = recover_from_ellipse(&fit.ellipse, plane);
    if recovery.delta.to_degrees() > config.max_delta_deg {
        return Err(SegmentOutcome::TiltTooSteep { delta_deg: recovery.delta.to_degrees() });
    }
    Ok(recovery)
}

fn process_segment(
    cloud: &PointCloud,
    planar_pts: &[Point2],
    offsets: &[f64],
    plane: &crate::geom::Plane,
    config: &DetectConfig,
) -> Candidate {
    let seg_len = planar_pts.len();
    if seg_len < config.gate.min_points {
        return Candidate::Rejected(SegmentOutcome::RejectedEllipse(
            EllipseRejection::TooFewPoints { count: seg_len, min: config.gate.min_points },
        ));
    }
    let recovery = match section_hypothesis(planar_pts, plane, config) {
        Ok(r) => r,
        // A slab as wide as the pipe radius smears a steep section along
        // the tilt direction by up to half-width times tan(delta); the
        // apparent eccentricity or over-cap tilt may be that artifact
        // rather than the cylinder's. Retry on thinner sub-slabs before
        // giving up. Other rejections are not slab-width effects.
        Err(first) => {
            let retry = matches!(
                &first,
                SegmentOutcome::RejectedEllipse(EllipseRejection::TooEccentric { .. })
                    | SegmentOutcome::TiltTooSteep { .. }
            );
            let mut rescued = None;
            if retry {
                let mut half = config.slab_half_width_m;
                for _ in 0..4 {
                    half /= 2.0;
                    let sub: Vec<Point2> = planar_pts
                        .iter()
                        .zip(offsets)
                        .filter(|&(_, o)| o.abs() <= half)
                        .map(|(p, _)| *p)
                        .collect();
                    if sub.len() < config.gate.min_points {
                        break;
                    }
                    if let Ok(r) = section_hypothesis(&sub, plane, config) {
                        rescued = Some(r);
                        break;
                    }
                }
            }
            match rescued {
                Some(r) => r,
                None => return Candidate::Rejected(first),
            }
        }
    };
    let choice = match disambiguate_axis(&cloud.points, &recovery, config.min_support) {
        Ok(c) => c,
        Err(crate::Error::InsufficientSupport { needed, got }) => {
            return Candidate::Rejected(SegmentOutcome::InsufficientSupport { needed, got })
        }
        Err(e) => {
            return Candidate::Rejected(SegmentOutcome::RefineFailed { message: e.to_string() })
        }
    };
    let mut model = match refine_cylinder(
        &cloud.points,
        &choice.gated,
        &choice.axis,
        recovery.radius,
        &recovery.axis_point,
    ) {
        Ok(m) => m,
        Err(crate::Error::InsufficientSupport { needed, got }) => {
            return Candidate::Rejected(SegmentOutcome::InsufficientSupport { needed, got })
        }
        Err(e) => {
            return Candidate::Rejected(SegmentOutcome::RefineFailed { message: e.to_string() })
        }
    };
    // Re-gate against the refined axis so inliers are not biased by the
    // initial gate, then report the axis point on the seed plane.
    if let Ok(regated) = gate_interest_points(
        &cloud.points,
        &model.axis,
        &model.axis_point,
        model.radius,
        config.min_support,
    ) {
        if let Ok(again) = refine_cylinder(
            &cloud.points,
            &regated,
            &model.axis,
            model.radius,
            &model.axis_point,
        ) {
            model = again;
        }
    }
    let denom = plane.normal.dot(&model.axis);
    if denom.abs() > 1e-9 {
        let t = -(plane.d + plane.normal.dot(&model.axis_point.coords)) / denom;
        model.axis_point += model.axis.into_inner() * t;
    }
    model.length = measure_length(&model, &cloud.points, config.length_mode);
    Candidate::Model(model)
}

fn is_duplicate(a: &CylinderModel, b: &CylinderModel, config: &DetectConfig) -> bool {
    let angle = a.axis.dot(&b.axis).abs().clamp(-1.0, 1.0).acos();
    if angle.to_degrees() > config.merge_axis_deg {
        return false;
    }
    // Distance between the (near-parallel) axis lines.
    let w = b.axis_point - a.axis_point;
    let sep = (w - a.axis.into_inner() * w.dot(&a.axis)).norm();
    sep < a.radius.max(b.radius)
}
