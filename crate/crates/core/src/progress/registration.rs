use nalgebra::{Matrix3, Rotation3};

use crate::geom::{Point3, Vec3};
use crate::{Error, Result};

/// p -> scale * R * p + translation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform { scale: 1.0, rotation: Rotation3::identity(), translation: Vec3::zeros() }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }
}

/// Closed-form least-squares similarity transform mapping the first point
/// of each pair onto the second.
///
/// Needs three non-collinear correspondences; the rotation is always
/// proper (no reflection). Pairs that already coincide exactly return the
/// exact identity, since zero residual cannot be improved on.
pub fn register_similarity(pairs: &[(Point3, Point3)]) -> Result<SimilarityTransform> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: pairs.len() });
    }
    if pairs.iter().all(|(p, q)| p == q) {
        return Ok(SimilarityTransform::identity());
    }
    let n = pairs.len() as f64;
    let mean_p: Vec3 = pairs.iter().map(|(p, _)| p.coords).sum::<Vec3>() / n;
    let mean_q: Vec3 = pairs.iter().map(|(_, q)| q.coords).sum::<Vec3>() / n;

    let mut cov = Matrix3::zeros();
    let mut var_p = 0.0;
    for (p, q) in pairs {
        let dp = p.coords - mean_p;
        let dq = q.coords - mean_q;
        cov += dq * dp.transpose();
        var_p += dp.norm_squared();
    }
    cov /= n;
    var_p /= n;
    if var_p <= 0.0 {
        return Err(Error::DegenerateGeometry("registration points coincide".into()));
    }

    let svd = cov.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let sv = svd.singular_values;
    // Rank < 2 means the correspondences span at most a line: rotation
    // about it is unconstrained.
    if sv[1] <= 1e-12 * sv[0].max(1e-300) {
        return Err(Error::DegenerateGeometry("collinear registration correspondences".into()));
    }
    let flip = (u.determinant() * v_t.determinant()) < 0.0;
    let mut d = Vec3::new(1.0, 1.0, 1.0);
    if flip {
        d[2] = -1.0;
    }
    let rot_m = u * Matrix3::from_diagonal(&d) * v_t;
    let rotation = Rotation3::from_matrix_unchecked(rot_m);
    let scale = (sv[0] * d[0] + sv[1] * d[1] + sv[2] * d[2]) / var_p;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::DegenerateGeometry(format!(
            "registration scale collapsed to {scale}"
        )));
    }
    let translation = mean_q - scale * (rot_m * mean_p);
    Ok(SimilarityTransform { scale, rotation, translation })
}
