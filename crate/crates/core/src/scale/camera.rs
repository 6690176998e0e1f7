//! Camera model shared by target detection, matching and triangulation.
//!
//! Convention: `x_cam = R (X - C)` with `R` the world-to-camera rotation and
//! `C` the camera center. All geometric estimation downstream of detection
//! works in *undistorted* pixel coordinates, i.e. the image a pinhole camera
//! with the same principal distance would have produced.

use nalgebra::{Matrix3, Matrix3x4, Quaternion, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geom::{Point2, Point3, UnitVec3, Vec3};
use crate::io::Bundle;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Intrinsics {
    /// Principal distance and principal point, in pixels.
    Pinhole { f: f64, cx: f64, cy: f64 },
    /// Adds polynomial radial distortion on normalized coordinates:
    /// `x_d = x_u (1 + k1 r^2 + k2 r^4)`.
    Radial { f: f64, cx: f64, cy: f64, k1: f64, k2: f64 },
}

impl Intrinsics {
    pub fn focal(&self) -> f64 {
        match *self {
            Intrinsics::Pinhole { f, .. } | Intrinsics::Radial { f, .. } => f,
        }
    }

    pub fn principal_point(&self) -> Point2 {
        match *self {
            Intrinsics::Pinhole { cx, cy, .. } | Intrinsics::Radial { cx, cy, .. } => {
                Point2::new(cx, cy)
            }
        }
    }

    /// Calibration matrix of the undistorted (pinhole-equivalent) camera.
    pub fn k_matrix(&self) -> Matrix3<f64> {
        let f = self.focal();
        let pp = self.principal_point();
        Matrix3::new(f, 0.0, pp.x, 0.0, f, pp.y, 0.0, 0.0, 1.0)
    }

    fn distortion_factor(&self, r2: f64) -> f64 {
        match *self {
            Intrinsics::Pinhole { .. } => 1.0,
            Intrinsics::Radial { k1, k2, .. } => 1.0 + k1 * r2 + k2 * r2 * r2,
        }
    }

    /// Normalized undistorted -> normalized distorted.
    pub fn distort_normalized(&self, u: Vector2<f64>) -> Vector2<f64> {
        u * self.distortion_factor(u.norm_squared())
    }

    /// Distorted pixel -> normalized undistorted, by fixed-point iteration.
    pub fn undistort_normalized(&self, px: Point2) -> Vector2<f64> {
        let f = self.focal();
        let pp = self.principal_point();
        let d = Vector2::new((px.x - pp.x) / f, (px.y - pp.y) / f);
        if matches!(self, Intrinsics::Pinhole { .. }) {
            return d;
        }
        let mut u = d;
        for _ in 0..25 {
            let next = d / self.distortion_factor(u.norm_squared());
            let step = (next - u).norm();
            u = next;
            if step < 1e-14 {
                break;
            }
        }
        u
    }

    /// Distorted pixel -> undistorted pixel.
    pub fn undistort_pixel(&self, px: Point2) -> Point2 {
        let u = self.undistort_normalized(px);
        let f = self.focal();
        let pp = self.principal_point();
        Point2::new(pp.x + f * u.x, pp.y + f * u.y)
    }

    /// Undistorted pixel -> distorted pixel.
    pub fn distort_pixel(&self, px: Point2) -> Point2 {
        let f = self.focal();
        let pp = self.principal_point();
        let u = Vector2::new((px.x - pp.x) / f, (px.y - pp.y) / f);
        let d = self.distort_normalized(u);
        Point2::new(pp.x + f * d.x, pp.y + f * d.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub view_id: u32,
    /// World-to-camera rotation.
    pub rotation: UnitQuaternion<f64>,
    pub center: Point3,
    pub intrinsics: Intrinsics,
}

impl CameraView {
    /// Camera at `center` with its optical axis through `target`; `up`
    /// resolves the roll (replaced when parallel to the viewing direction).
    pub fn looking_at(
        view_id: u32,
        center: Point3,
        target: Point3,
        up: Vec3,
        intrinsics: Intrinsics,
    ) -> Self {
        let forward = (target - center).normalize();
        let up = if up.cross(&forward).norm() < 1e-9 { Vector3::x() } else { up };
        let right = up.cross(&forward).normalize();
        let down = forward.cross(&right);
        let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        CameraView {
            view_id,
            rotation: UnitQuaternion::from_rotation_matrix(
                &nalgebra::Rotation3::from_matrix_unchecked(rot),
            ),
            center,
            intrinsics,
        }
    }

    pub fn to_camera(&self, x: &Point3) -> Vec3 {
        self.rotation * (x - self.center)
    }

    pub fn depth(&self, x: &Point3) -> f64 {
        self.to_camera(x).z
    }

    /// Project into the distorted image. `None` when the point is not in
    /// front of the camera.
    pub fn project(&self, x: &Point3) -> Option<Point2> {
        let c = self.to_camera(x);
        if c.z <= 0.0 {
            return None;
        }
        let d = self.intrinsics.distort_normalized(Vector2::new(c.x / c.z, c.y / c.z));
        let f = self.intrinsics.focal();
        let pp = self.intrinsics.principal_point();
        Some(Point2::new(pp.x + f * d.x, pp.y + f * d.y))
    }

    /// Project into the undistorted (pinhole-equivalent) image.
    pub fn project_undistorted(&self, x: &Point3) -> Option<Point2> {
        let c = self.to_camera(x);
        if c.z <= 0.0 {
            return None;
        }
        let f = self.intrinsics.focal();
        let pp = self.intrinsics.principal_point();
        Some(Point2::new(pp.x + f * c.x / c.z, pp.y + f * c.y / c.z))
    }

    /// World-space direction of the ray through an undistorted pixel.
    pub fn ray(&self, undist_px: Point2) -> UnitVec3 {
        let f = self.intrinsics.focal();
        let pp = self.intrinsics.principal_point();
        let dir_cam = Vector3::new((undist_px.x - pp.x) / f, (undist_px.y - pp.y) / f, 1.0);
        UnitVec3::new_normalize(self.rotation.inverse() * dir_cam)
    }

    /// `K [R | -R C]` of the undistorted camera.
    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        let r = self.rotation.to_rotation_matrix();
        let t = -(r * self.center.coords);
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(r.matrix());
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        self.intrinsics.k_matrix() * rt
    }
}

/// Convert registered bundle views into camera models, resolving intrinsics
/// by id. Unknown intrinsics models or missing references are rejected.
pub fn views_from_bundle(bundle: &Bundle) -> Result<Vec<CameraView>> {
    bundle
        .views
        .iter()
        .map(|v| {
            let intr = bundle.intrinsics_for(v).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "view {} references unknown intrinsics id {}",
                    v.id, v.intrinsics_id
                ))
            })?;
            let intrinsics = match (intr.model.as_str(), intr.values.as_slice()) {
                ("pinhole", &[f, cx, cy]) => Intrinsics::Pinhole { f, cx, cy },
                ("radial", &[f, cx, cy, k1, k2]) => Intrinsics::Radial { f, cx, cy, k1, k2 },
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "intrinsics {}: unsupported model '{}' with {} values",
                        intr.id,
                        intr.model,
                        intr.values.len()
                    )))
                }
            };
            let q = v.quat;
            Ok(CameraView {
                view_id: v.id,
                rotation: UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])),
                center: Point3::new(v.center[0], v.center[1], v.center[2]),
                intrinsics,
            })
        })
        .collect()
}
