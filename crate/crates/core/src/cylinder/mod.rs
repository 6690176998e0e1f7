//! Cylinder detection from a seed-plane cross-section: slab selection,
//! section-ellipse recovery, axis disambiguation, robust refinement, and
//! length measurement.

mod detect;
mod refine;

pub use detect::{detect_all, DetectConfig, Detection, SegmentDiagnostic, SegmentOutcome};
pub use refine::{fit_circle_robust, refine_cylinder, CircleFit};

use crate::ellipse::Ellipse2D;
use crate::geom::{
    perpendicular_basis, rotation_aligning, Plane, Point3, PointCloud, UnitVec3, Vec3,
};
use crate::{Error, Result};

/// A detected cylinder.
///
/// `axis_point` is a point on the axis; for plane-seeded detections it is
/// the intersection of the axis with the seed plane. `radial_rmse` is over
/// the inlier set.
#[derive(Debug, Clone)]
pub struct CylinderModel {
    pub axis: UnitVec3,
    pub axis_point: Point3,
    pub radius: f64,
    pub length: f64,
    pub inliers: Vec<usize>,
    pub radial_rmse: f64,
}

/// Seed plane for detection: explicit, or through three anchor points.
#[derive(Debug, Clone)]
pub enum SeedPlaneSpec {
    Explicit(Plane),
    Anchors([Point3; 3]),
}

impl SeedPlaneSpec {
    pub fn resolve(&self) -> Result<Plane> {
        match self {
            Self::Explicit(p) => Ok(*p),
            Self::Anchors([a, b, c]) => Plane::from_three_points(*a, *b, *c),
        }
    }
}

/// Indices of cloud points within `half_width` of the plane.
pub fn slab_select(cloud: &PointCloud, plane: &Plane, half_width: f64) -> Result<Vec<usize>> {
    if !(half_width > 0.0) {
        return Err(Error::InvalidInput(format!(
            "slab half-width must be positive, got {half_width}"
        )));
    }
    let idx: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= half_width)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptySlab { half_width });
    }
    Ok(idx)
}

/// Cylinder parameters recovered from a section ellipse: radius, tilt, the
/// axis/plane intersection point, and the two tilt-sign axis candidates.
#[derive(Debug, Clone)]
pub struct EllipseRecovery {
    pub radius: f64,
    /// Angle between the cylinder axis and the plane normal, radians.
    pub delta: f64,
    pub axis_point: Point3,
    /// Normal rotated by +delta and -delta about the section minor axis.
    pub candidates: [UnitVec3; 2],
}

/// Recover cylinder parameters from an ellipse fitted in the rotated plane
/// frame (the frame where the plane normal is +z).
///
/// A cylinder of radius `R` whose axis makes angle `delta` with the plane
/// normal cuts the plane in an ellipse with semi-minor `R` (the minor axis
/// is perpendicular to the tilt direction) and semi-major `R / cos(delta)`;
/// the major axis is the in-plane projection of the cylinder axis. The
/// section alone cannot tell `+delta` from `-delta`, hence two candidates.
pub fn recover_from_ellipse(e: &Ellipse2D, plane: &Plane) -> EllipseRecovery {
    let radius = e.semi_minor;
    let delta = (e.semi_minor / e.semi_major).clamp(-1.0, 1.0).acos();

    let rot = rotation_aligning(&plane.normal, &UnitVec3::new_unchecked(Vec3::z()));
    let rot_inv = rot.inverse();
    // Points on the plane sit at z = -d in the rotated frame.
    let center_rot = Vec3::new(e.center.x, e.center.y, -plane.d);
    let axis_point = Point3::from(rot_inv * center_rot);

    let (sin_d, cos_d) = delta.sin_cos();
    let major_rot = Vec3::new(e.theta.cos(), e.theta.sin(), 0.0);
    let plus = rot_inv * (Vec3::z() * cos_d + major_rot * sin_d);
    let minus = rot_inv * (Vec3::z() * cos_d - major_rot * sin_d);
    EllipseRecovery {
        radius,
        delta,
        axis_point,
        candidates: [UnitVec3::new_normalize(plus), UnitVec3::new_normalize(minus)],
    }
}

/// Gating radius around a candidate axis: `max(2R, R + 10cm)`.
pub fn gating_radius(radius: f64) -> f64 {
    (2.0 * radius).max(radius + 0.10)
}

/// Indices of points within the gating radius of the candidate axis
/// (distance measured perpendicular to the axis, unbounded along it).
pub fn gate_interest_points(
    points: &[Point3],
    axis: &UnitVec3,
    axis_point: &Point3,
    radius: f64,
    min_support: usize,
) -> Result<Vec<usize>> {
    let gate = gating_radius(radius);
    let idx: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let w = *p - axis_point;
            let axial = w.dot(axis);
            (w - axis.into_inner() * axial).norm() <= gate
        })
        .map(|(i, _)| i)
        .collect();
    if idx.len() < min_support {
        return Err(Error::InsufficientSupport { needed: min_support, got: idx.len() });
    }
    Ok(idx)
}

/// Outcome of resolving the two-fold axis ambiguity.
#[derive(Debug, Clone)]
pub struct AxisChoice {
    pub axis: UnitVec3,
    /// Gated support indices of the winning candidate.
    pub gated: Vec<usize>,
    /// Index of the winner: 0 and 1 are the signed-tilt candidates from
    /// `EllipseRecovery::candidates`, 2 is the plane-normal fallback.
    pub chosen: usize,
    /// Per-candidate robust circle RMSE of axis-perpendicular projections.
    pub rmse: [f64; 3],
}

/// Pick the axis candidate whose gated points, projected onto the plane
/// perpendicular to it, best form a circle. Points spread along the true
/// axis collapse onto one circle only for the true direction; the wrong
/// candidate (off by `2 delta`) smears them. The plane normal is scored as
/// a third candidate because a small or noisy section can fake a tilt the
/// cylinder does not have; zero tilt wins exactly when its projection is
/// more circular than either signed hypothesis. Ties keep the lowest index,
/// so the `+delta` candidate is preferred.
pub fn disambiguate_axis(
    points: &[Point3],
    recovery: &EllipseRecovery,
    min_support: usize,
) -> Result<AxisChoice> {
    // The tilt cap upstream keeps delta well below 90 degrees, so the
    // bisector of the signed candidates is the plane normal.
    let normal = UnitVec3::new_normalize(
        recovery.candidates[0].into_inner() + recovery.candidates[1].into_inner(),
    );
    let candidates = [recovery.candidates[0], recovery.candidates[1], normal];
    let mut gated_sets: [Option<Vec<usize>>; 3] = [None, None, None];
    let mut rmse = [f64::INFINITY; 3];
    let mut last_err = None;
    for (k, cand) in candidates.iter().enumerate() {
        let gated = match gate_interest_points(
            points,
            cand,
            &recovery.axis_point,
            recovery.radius,
            min_support,
        ) {
            Ok(g) => g,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let (u, v) = perpendicular_basis(cand);
        let planar: Vec<crate::geom::Point2> = gated
            .iter()
            .map(|&i| {
                let w = points[i] - recovery.axis_point;
                crate::geom::Point2::new(w.dot(&u), w.dot(&v))
            })
            .collect();
        match fit_circle_robust(&planar) {
            Ok(fit) => {
                rmse[k] = fit.inlier_rmse;
                gated_sets[k] = Some(gated);
            }
            Err(e) => last_err = Some(e),
        }
    }
    let mut chosen = 0;
    for k in 1..candidates.len() {
        if rmse[k] < rmse[chosen] {
            chosen = k;
        }
    }
    match gated_sets[chosen].take() {
        Some(gated) => Ok(AxisChoice { axis: candidates[chosen], gated, chosen, rmse }),
        None => Err(last_err.expect("no candidate succeeded without an error")),
    }
}

/// How the axial extent of a model is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LengthMode {
    /// Extent between the 1st and 99th percentile of inlier axial
    /// coordinates; robust to residual outliers.
    TrimmedPercentile,
    /// Raw min/max extent.
    MinMax,
}

impl LengthMode {
    const TRIM_LO: f64 = 0.01;
    const TRIM_HI: f64 = 0.99;
}

/// Axial extent of the model's inliers.
pub fn measure_length(model: &CylinderModel, points: &[Point3], mode: LengthMode) -> f64 {
    let mut axial: Vec<f64> = model
        .inliers
        .iter()
        .map(|&i| (points[i] - model.axis_point).dot(&model.axis))
        .collect();
    if axial.is_empty() {
        return 0.0;
    }
    axial.sort_unstable_by(f64::total_cmp);
    match mode {
        LengthMode::MinMax => axial[axial.len() - 1] - axial[0],
        LengthMode::TrimmedPercentile => {
            percentile(&axial, LengthMode::TRIM_HI) - percentile(&axial, LengthMode::TRIM_LO)
        }
    }
}

/// Linear-interpolation percentile of a sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
