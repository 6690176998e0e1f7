//! Planes and total-least-squares plane fitting.

use nalgebra::Matrix3;

use super::{centroid, Point3, UnitVec3, Vec3};
use crate::{Error, Result};

/// An oriented plane `normal . p + d = 0` with unit normal.
#[derive(Debug, Clone, Copy)]
pub struct Plane {
    pub normal: UnitVec3,
    pub d: f64,
}

impl Plane {
    pub fn new(normal: Vec3, d: f64) -> Result<Self> {
        let norm = normal.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::DegenerateGeometry("zero-length plane normal".into()));
        }
        Ok(Self { normal: UnitVec3::new_unchecked(normal / norm), d: d / norm })
    }

    pub fn from_point_normal(point: Point3, normal: Vec3) -> Result<Self> {
        let mut plane = Self::new(normal, 0.0)?;
        plane.d = -plane.normal.dot(&point.coords);
        Ok(plane)
    }

    /// Plane through three non-collinear points. The normal follows the
    /// right-hand rule on `(b - a) x (c - a)`.
    pub fn from_three_points(a: Point3, b: Point3, c: Point3) -> Result<Self> {
        let n = (b - a).cross(&(c - a));
        let scale = (b - a).norm().max((c - a).norm());
        if n.norm() <= 1e-12 * scale * scale {
            return Err(Error::DegenerateGeometry("anchor points are collinear".into()));
        }
        Self::from_point_normal(a, n)
    }

    /// Signed distance of `p` from the plane (positive on the normal side).
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) + self.d
    }

    /// A point on the plane (the foot of the perpendicular from the origin).
    pub fn point_on_plane(&self) -> Point3 {
        Point3::from(-self.d * self.normal.into_inner())
    }
}

/// Result of a total-least-squares plane fit.
#[derive(Debug, Clone, Copy)]
pub struct PlaneFit {
    pub plane: Plane,
    /// Root-mean-square orthogonal residual of the input points.
    pub rms: f64,
}

/// Fit a plane to `points` by total least squares: the normal is the
/// eigenvector of the centered 3x3 scatter matrix with the smallest
/// eigenvalue. Needs at least three non-collinear points.
pub fn fit_plane(points: &[Point3]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: points.len() });
    }
    let c = centroid(points);
    let mut scatter = Matrix3::zeros();
    for p in points {
        let q = p - c;
        scatter += q * q.transpose();
    }
    let eig = scatter.symmetric_eigen();
    // Ascending order of eigenvalues by index.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let [lo, mid, hi] = order;
    let (l_lo, l_mid, l_hi) = (
        eig.eigenvalues[lo].max(0.0),
        eig.eigenvalues[mid].max(0.0),
        eig.eigenvalues[hi].max(0.0),
    );
    // Collinear input: no spread in the second principal direction.
    if l_hi <= 0.0 || (l_mid / l_hi).sqrt() < 1e-9 {
        return Err(Error::DegenerateGeometry("points are collinear".into()));
    }
    let normal: Vec3 = eig.eigenvectors.column(lo).into_owned();
    let plane = Plane::from_point_normal(c, normal)?;
    let rms = (l_lo / points.len() as f64).sqrt();
    Ok(PlaneFit { plane, rms })
}
