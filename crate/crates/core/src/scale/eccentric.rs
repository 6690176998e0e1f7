//! Perspective eccentricity of projected circles.
//!
//! The image of a circle is an ellipse whose center is not the image of the
//! circle's center unless the view is fronto-parallel and on-axis. Ellipse
//! detectors measure the ellipse center, so triangulating raw detections
//! biases the reconstruction. Knowing an (approximate) circle pose and
//! radius, the offset has a closed form: map the unit circle through the
//! plane-to-image homography, take the center of the resulting conic, and
//! compare it with the projected circle center.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::geom::{perpendicular_basis, Point2, Point3, UnitVec3};

use super::camera::CameraView;

/// Image conic of the circle `|x - center| = radius` lying in the plane
/// through `center` with the given `normal`, in undistorted pixel
/// coordinates. `None` when the circle is behind the camera or the
/// homography is singular (plane through the projection center).
pub fn circle_image_conic(
    view: &CameraView,
    center: Point3,
    radius: f64,
    normal: &UnitVec3,
) -> Option<Matrix3<f64>> {
    let (e1, e2) = perpendicular_basis(normal);
    let cam_center = view.to_camera(&center);
    if cam_center.z <= 0.0 {
        return None;
    }
    let r_mat = view.rotation.to_rotation_matrix();
    let h = view.intrinsics.k_matrix()
        * Matrix3::from_columns(&[
            radius * (r_mat * e1.into_inner()),
            radius * (r_mat * e2.into_inner()),
            cam_center,
        ]);
    // A plane through the projection center makes the homography singular.
    if h.determinant().abs() < 1e-12 * h.norm().powi(3) {
        return None;
    }
    let h_inv = h.try_inverse()?;
    Some(h_inv.transpose() * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)) * h_inv)
}

/// Center of a central conic given as a symmetric 3x3 matrix.
pub fn conic_center(c: &Matrix3<f64>) -> Option<Point2> {
    let m = Matrix2::new(c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]);
    let rhs = Vector2::new(-c[(0, 2)], -c[(1, 2)]);
    let scale = c.abs().max();
    if m.determinant().abs() < 1e-14 * scale * scale {
        return None;
    }
    m.lu().solve(&rhs).map(|s| Point2::new(s.x, s.y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EccentricityCorrection {
    /// Center estimate to use for triangulation, undistorted pixels.
    pub corrected: Point2,
    /// Magnitude of the applied shift, px.
    pub shift_px: f64,
    /// True when the closed form was unavailable and the observation was
    /// passed through unchanged.
    pub fallback: bool,
}

/// Shift a detected ellipse center to where the circle's true center
/// projects, using the current estimate of the circle pose.
///
/// The observed center is assumed to sit at the conic center; the applied
/// shift is `project(center) - conic_center`, which is exact when the pose
/// and radius are exact and degrades smoothly with their error.
pub fn correct_eccentricity(
    view: &CameraView,
    observed: Point2,
    circle_center: Point3,
    radius: f64,
    normal: &UnitVec3,
) -> EccentricityCorrection {
    let fallback = EccentricityCorrection { corrected: observed, shift_px: 0.0, fallback: true };
    let Some(conic) = circle_image_conic(view, circle_center, radius, normal) else {
        return fallback;
    };
    let Some(cc) = conic_center(&conic) else {
        return fallback;
    };
    let Some(proj) = view.project_undistorted(&circle_center) else {
        return fallback;
    };
    let delta = proj - cc;
    EccentricityCorrection {
        corrected: observed + delta,
        shift_px: delta.norm(),
        fallback: false,
    }
}
