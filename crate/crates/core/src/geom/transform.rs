//! Rigid and similarity transforms, and minimal-angle vector alignment.

use nalgebra::Rotation3;

use super::{Point3, UnitVec3, Vec3};

/// Rotation plus translation, `p -> R p + t`.
#[derive(Debug, Clone, Copy)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rotation.inverse();
        Self { rotation: inv_rot, translation: -(inv_rot * self.translation) }
    }

    /// Composition: `self` applied after `other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// A uniformly random rotation with translation in `[-1, 1]^3`.
    /// Used by property tests and synthetic oracles.
    pub fn random<R: rand::Rng>(rng: &mut R) -> Self {
        let axis = random_unit_vector(rng);
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        let translation = Vec3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        Self { rotation: Rotation3::from_axis_angle(&axis, angle), translation }
    }
}

/// Uniform scale, rotation, and translation, `p -> s R p + t`.
#[derive(Debug, Clone, Copy)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: Rotation3<f64>, translation: Vec3) -> Self {
        assert!(scale > 0.0, "similarity scale must be positive");
        Self { scale, rotation, translation }
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }
}

/// The minimal-angle rotation carrying unit vector `v` onto unit vector
/// `target` (rotation about `v x target`).
///
/// For antiparallel inputs the axis is ambiguous; the tie-break is a fixed
/// perpendicular: `v` crossed with the standard basis vector least aligned
/// with it (lowest index on ties).
pub fn rotation_aligning(v: &UnitVec3, target: &UnitVec3) -> Rotation3<f64> {
    let cross = v.cross(target);
    let sin = cross.norm();
    let cos = v.dot(target);
    if sin < 1e-14 {
        if cos > 0.0 {
            return Rotation3::identity();
        }
        let axis = UnitVec3::new_normalize(v.cross(&least_aligned_basis(v)));
        return Rotation3::from_axis_angle(&axis, std::f64::consts::PI);
    }
    let axis = UnitVec3::new_unchecked(cross / sin);
    Rotation3::from_axis_angle(&axis, sin.atan2(cos))
}

fn least_aligned_basis(v: &UnitVec3) -> Vec3 {
    let abs = [v.x.abs(), v.y.abs(), v.z.abs()];
    let mut idx = 0;
    for i in 1..3 {
        if abs[i] < abs[idx] {
            idx = i;
        }
    }
    let mut e = Vec3::zeros();
    e[idx] = 1.0;
    e
}

/// A deterministic right-handed orthonormal pair spanning the plane
/// perpendicular to `axis` (so `(u, v, axis)` is right-handed).
pub fn perpendicular_basis(axis: &UnitVec3) -> (UnitVec3, UnitVec3) {
    let u = UnitVec3::new_normalize(axis.cross(&least_aligned_basis(axis)));
    let v = UnitVec3::new_normalize(axis.cross(&u));
    // axis x u points opposite the right-handed v; flip so u x v = axis.
    let v = if u.cross(&v).dot(axis) > 0.0 { v } else { UnitVec3::new_unchecked(-v.into_inner()) };
    (u, v)
}

/// A unit vector uniformly distributed on the sphere.
pub fn random_unit_vector<R: rand::Rng>(rng: &mut R) -> UnitVec3 {
    loop {
        let v = Vec3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n = v.norm();
        if n > 1e-6 && n <= 1.0 {
            return UnitVec3::new_unchecked(v / n);
        }
    }
}
