//! Foundational geometric types and primitives shared by all pipeline stages:
//! point clouds, planes, rigid/similarity transforms, vector-aligning
//! rotations, total-least-squares plane fitting, and 2D convex hull area.
//!
//! Coordinates are `f64` throughout. The internal length unit is meters;
//! clouds loaded from an unscaled reconstruction carry
//! [`UnitState::Arbitrary`] until a scale factor is applied.

mod hull;
mod plane;
mod transform;

pub use hull::{convex_hull, convex_hull_area};
pub use plane::{fit_plane, Plane, PlaneFit};
pub use transform::{
    perpendicular_basis, random_unit_vector, rotation_aligning, RigidTransform,
    SimilarityTransform,
};

use crate::{Error, Result};

pub type Point2 = nalgebra::Point2<f64>;
pub type Point3 = nalgebra::Point3<f64>;
pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type UnitVec3 = nalgebra::Unit<Vec3>;
pub type Rotation3 = nalgebra::Rotation3<f64>;

/// Whether cloud coordinates are in meters or in the arbitrary scale of an
/// unscaled reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum UnitState {
    Arbitrary,
    Metric,
}

/// A dense 3D point cloud with optional per-point color.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub unit_state: UnitState,
}

impl PointCloud {
    /// Build a cloud in the given unit state. All coordinates must be finite;
    /// colors, when present, must be one triple per point.
    pub fn new(points: Vec<Point3>, unit_state: UnitState) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput(format!("non-finite point coordinate: {p:?}")));
        }
        Ok(Self { points, colors: None, unit_state })
    }

    /// A metric-frame cloud (coordinates already in meters).
    pub fn metric(points: Vec<Point3>) -> Result<Self> {
        Self::new(points, UnitState::Metric)
    }

    /// An arbitrary-scale cloud, as produced by an unscaled reconstruction.
    pub fn arbitrary(points: Vec<Point3>) -> Result<Self> {
        Self::new(points, UnitState::Arbitrary)
    }

    pub fn with_colors(mut self, colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.len() != self.points.len() {
            return Err(Error::InvalidInput(format!(
                "{} colors for {} points",
                colors.len(),
                self.points.len()
            )));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Centroid of a non-empty point set.
pub(crate) fn centroid(points: &[Point3]) -> Point3 {
    let mut acc = Vec3::zeros();
    for p in points {
        acc += p.coords;
    }
    Point3::from(acc / points.len() as f64)
}
