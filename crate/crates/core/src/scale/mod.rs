//! Metric scale recovery from a circle target board.
//!
//! A reconstruction from images is known only up to similarity; this module
//! pins its scale using a board of coplanar circles with known metric
//! layout. The chain is: detect circle targets per view, match them across
//! views and to the board layout, triangulate their centers, correct the
//! centers for perspective eccentricity, and take the scale as the RMS
//! spread ratio between the metric layout and the reconstructed centers.

mod camera;
mod detect;
mod eccentric;
mod matching;
mod sweep;
mod triangulate;

pub use camera::{views_from_bundle, CameraView, Intrinsics};
pub use detect::{detect_target_ellipses, TargetCandidate, TargetDetectConfig};
pub use eccentric::{circle_image_conic, conic_center, correct_eccentricity, EccentricityCorrection};
pub use matching::{match_targets, TargetMatches};
pub use sweep::{view_count_sweep, SweepRow};
pub use triangulate::{reprojection_rms, triangulate_point, MIN_PARALLAX_DEG};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{centroid, fit_plane, Point2, Point3, PointCloud, UnitState};
use crate::{Error, Result};

/// Circle target board with a known metric layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBoard {
    pub board_id: String,
    pub circle_radius_m: f64,
    /// Circle center coordinates in the board's metric frame.
    pub centers_m: Vec<[f64; 3]>,
}

impl TargetBoard {
    pub fn centers(&self) -> Vec<Point3> {
        self.centers_m.iter().map(|c| Point3::new(c[0], c[1], c[2])).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.circle_radius_m.is_finite() && self.circle_radius_m > 0.0) {
            return Err(Error::InvalidInput(format!(
                "board {}: circle radius must be positive",
                self.board_id
            )));
        }
        let n = self.centers_m.len();
        if n < 3 {
            return Err(Error::InsufficientPoints { needed: 3, got: n });
        }
        if n > 8 {
            return Err(Error::InvalidInput(format!(
                "board {}: {} circles exceed the supported maximum of 8",
                self.board_id, n
            )));
        }
        if self.centers_m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "board {}: non-finite center coordinate",
                self.board_id
            )));
        }
        let pts = self.centers();
        let c = centroid(&pts);
        let mut scatter = nalgebra::Matrix3::<f64>::zeros();
        for p in &pts {
            let q = p - c;
            scatter += q * q.transpose();
        }
        let mut eig: Vec<f64> = scatter.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        if eig[0] <= 0.0 || eig[1] < 1e-12 * eig[0] {
            return Err(Error::DegenerateGeometry(format!(
                "board {}: circle centers are collinear",
                self.board_id
            )));
        }
        Ok(())
    }

    /// Smallest relative gap between distinct pairwise center distances.
    ///
    /// Labeling targets relies on pairwise distance ratios, so a board with
    /// two nearly equal distances (gap near zero, e.g. any mirror-symmetric
    /// layout) invites ambiguous matches. Values comfortably above a couple
    /// of percent make labeling robust.
    pub fn distance_ratio_separation(&self) -> f64 {
        let pts = self.centers();
        let mut d = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d.push((pts[i] - pts[j]).norm());
            }
        }
        d.sort_by(f64::total_cmp);
        d.windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] - 1.0 } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn read_board(path: &Path) -> Result<TargetBoard> {
    let text = std::fs::read_to_string(path)?;
    let board: TargetBoard = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    board.validate()?;
    Ok(board)
}

pub fn write_board(path: &Path, board: &TargetBoard) -> Result<()> {
    let text = serde_json::to_string_pretty(board).expect("board serializes");
    std::fs::write(path, text)?;
    Ok(())
}

/// RMS spread ratio between matched metric and reconstructed points:
/// `sqrt(sum |P_i - mean P|^2 / sum |Q_i - mean Q|^2)`. Multiplying
/// reconstruction coordinates by the result makes them metric.
pub fn compute_scale(metric: &[Point3], recon: &[Point3]) -> Result<f64> {
    if metric.len() != recon.len() {
        return Err(Error::InvalidInput(format!(
            "point count mismatch: {} metric vs {} reconstructed",
            metric.len(),
            recon.len()
        )));
    }
    if metric.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: metric.len() });
    }
    let pm = centroid(metric);
    let qm = centroid(recon);
    let num: f64 = metric.iter().map(|p| (p - pm).norm_squared()).sum();
    let den: f64 = recon.iter().map(|q| (q - qm).norm_squared()).sum();
    if den <= 0.0 {
        return Err(Error::DegenerateGeometry("reconstructed targets coincide".into()));
    }
    if num <= 0.0 {
        return Err(Error::DegenerateGeometry("metric targets coincide".into()));
    }
    Ok((num / den).sqrt())
}

/// Scale an arbitrary-unit cloud into meters.
pub fn apply_scale(cloud: &PointCloud, scale: f64) -> Result<PointCloud> {
    if cloud.unit_state == UnitState::Metric {
        return Err(Error::AlreadyMetric);
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidInput(format!("scale must be positive, got {scale}")));
    }
    let mut out = cloud.clone();
    for p in &mut out.points {
        *p *= scale;
    }
    out.unit_state = UnitState::Metric;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Apply the perspective eccentricity correction to detected centers
    /// before the final triangulation.
    pub correct_eccentricity: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { correct_eccentricity: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSolution {
    /// Final reconstruction-to-metric scale factor.
    pub scale: f64,
    /// Scale from uncorrected centers (equals `scale` when the correction
    /// is disabled or skipped).
    pub preliminary_scale: f64,
    /// Board-indexed reconstructed centers used for the final estimate.
    pub centers_recon: Vec<Option<Point3>>,
    /// Board-indexed reprojection RMS of the final centers, px.
    pub per_target_rms_px: Vec<Option<f64>>,
    pub matched_targets: usize,
    /// Whether the eccentricity correction was actually applied.
    pub eccentricity_applied: bool,
    /// Mean center shift introduced by the correction, px.
    pub mean_eccentricity_shift_px: f64,
    pub match_score: f64,
    pub match_runner_up: f64,
}

/// Full scale pipeline on per-view candidate centers (raw pixels).
///
/// `candidates` is parallel to `views`: the detected target centers of each
/// view in distorted pixel coordinates, in any order. Needs at least three
/// board targets matched and triangulated.
pub fn solve_scale(
    views: &[CameraView],
    candidates: &[Vec<Point2>],
    board: &TargetBoard,
    cfg: &SolveConfig,
) -> Result<ScaleSolution> {
    board.validate()?;
    if views.len() != candidates.len() {
        return Err(Error::InvalidInput(format!(
            "{} views but {} candidate lists",
            views.len(),
            candidates.len()
        )));
    }

    let undist: Vec<Vec<Point2>> = views
        .iter()
        .zip(candidates)
        .map(|(v, cs)| cs.iter().map(|&c| v.intrinsics.undistort_pixel(c)).collect())
        .collect();

    let matches = match_targets(views, &undist, board)?;
    let board_pts = board.centers();
    let n = board_pts.len();

    let obs_of = |b: usize, centers: &[Vec<Point2>]| -> Vec<(&CameraView, Point2)> {
        matches.assignments[b]
            .iter()
            .map(|&(vi, ci)| (&views[vi], centers[vi][ci]))
            .collect()
    };

    let triangulate_all = |centers: &[Vec<Point2>]| -> Vec<Option<Point3>> {
        (0..n)
            .map(|b| {
                let obs = obs_of(b, centers);
                if obs.len() < 2 {
                    return None;
                }
                triangulate_point(&obs).ok()
            })
            .collect()
    };

    let q0 = triangulate_all(&undist);
    let matched: Vec<usize> = (0..n).filter(|&b| q0[b].is_some()).collect();
    if matched.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "only {} of {} board targets triangulated",
            matched.len(),
            n
        )));
    }
    let metric: Vec<Point3> = matched.iter().map(|&b| board_pts[b]).collect();
    let recon0: Vec<Point3> = matched.iter().map(|&b| q0[b].unwrap()).collect();
    let preliminary_scale = compute_scale(&metric, &recon0)?;

    let mut final_centers = undist.clone();
    let mut centers_final = q0.clone();
    let mut scale = preliminary_scale;
    let mut eccentricity_applied = false;
    let mut mean_shift = 0.0;

    if cfg.correct_eccentricity {
        if let Ok(fit) = fit_plane(&recon0) {
            let r_recon = board.circle_radius_m / preliminary_scale;
            let mut shifts = Vec::new();
            for &b in &matched {
                let q = q0[b].unwrap();
                for &(vi, ci) in &matches.assignments[b] {
                    let corr = correct_eccentricity(
                        &views[vi],
                        undist[vi][ci],
                        q,
                        r_recon,
                        &fit.plane.normal,
                    );
                    final_centers[vi][ci] = corr.corrected;
                    if !corr.fallback {
                        shifts.push(corr.shift_px);
                    }
                }
            }
            if !shifts.is_empty() {
                let q1 = triangulate_all(&final_centers);
                // Keep the uncorrected center for any target whose corrected
                // re-triangulation fails.
                let recon1: Vec<Point3> = matched
                    .iter()
                    .map(|&b| q1[b].unwrap_or_else(|| q0[b].unwrap()))
                    .collect();
                scale = compute_scale(&metric, &recon1)?;
                for (&b, &q) in matched.iter().zip(&recon1) {
                    centers_final[b] = Some(q);
                }
                mean_shift = shifts.iter().sum::<f64>() / shifts.len() as f64;
                eccentricity_applied = true;
            }
        }
    }

    let per_target_rms_px: Vec<Option<f64>> = (0..n)
        .map(|b| {
            centers_final[b].map(|q| {
                let obs = obs_of(b, &final_centers);
                reprojection_rms(&obs, &q)
            })
        })
        .collect();

    Ok(ScaleSolution {
        scale,
        preliminary_scale,
        centers_recon: centers_final,
        per_target_rms_px,
        matched_targets: matched.len(),
        eccentricity_applied,
        mean_eccentricity_shift_px: mean_shift,
        match_score: matches.best_score,
        match_runner_up: matches.runner_up_score,
    })
}

#[cfg(test)]
pub(crate) mod test_fixtures {
    use super::*;
    use crate::geom::Vec3;

    /// Planar board whose sorted pairwise distances are separated by at
    /// least 13%, so labeling is unambiguous.
    pub fn generic_board() -> TargetBoard {
        TargetBoard {
            board_id: "test-generic".into(),
            circle_radius_m: 0.025,
            centers_m: vec![
                [0.32, 0.07, 0.0],
                [0.03, 0.42, 0.0],
                [0.28, 0.24, 0.0],
                [0.18, 0.44, 0.0],
                [0.58, 0.06, 0.0],
            ],
        }
    }

    /// Square plus center: mirror symmetric, so labeling is ambiguous.
    pub fn symmetric_board() -> TargetBoard {
        TargetBoard {
            board_id: "test-symmetric".into(),
            circle_radius_m: 0.025,
            centers_m: vec![
                [0.0, 0.0, 0.0],
                [0.4, 0.0, 0.0],
                [0.4, 0.4, 0.0],
                [0.0, 0.4, 0.0],
                [0.2, 0.2, 0.0],
            ],
        }
    }

    /// Cameras on an arc in front of the board (board plane is z = 0,
    /// centered near (0.27, 0.25)).
    pub fn ring_views(n: usize, distance: f64, intrinsics: Intrinsics) -> Vec<CameraView> {
        let target = Point3::new(0.27, 0.25, 0.0);
        (0..n)
            .map(|i| {
                let t = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
                let ang = (-50.0 + 100.0 * t).to_radians();
                let center = target
                    + Vec3::new(
                        distance * ang.sin(),
                        0.3 * (t - 0.5),
                        -distance * ang.cos(),
                    );
                CameraView::looking_at(i as u32, center, target, Vec3::y(), intrinsics)
            })
            .collect()
    }
}
