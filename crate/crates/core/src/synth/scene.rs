//! Synthetic cylinder scenes with exact ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::derive_seed;
use crate::geom::{perpendicular_basis, Point3, PointCloud, UnitVec3, Vec3};
use crate::{Error, Result};

/// One synthetic pipe: a finite cylinder sampled over a partial angular arc,
/// the way a pipe scanned from one side appears in a reconstruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CylinderSpec {
    pub radius_m: f64,
    /// Axis direction (need not be normalized in the input).
    pub axis: [f64; 3],
    /// One end of the axis segment.
    pub base: [f64; 3],
    pub length_m: f64,
    /// Angular extent of the sampled surface band, degrees in (0, 360].
    /// The arc is centered on a fixed direction perpendicular to the axis.
    pub visible_arc_deg: f64,
    /// Surface sample density in points per square meter of visible surface.
    pub density_pts_per_m2: f64,
    /// Isotropic Gaussian noise applied to each sample, meters.
    pub noise_sigma_m: f64,
    /// Planned class this pipe belongs to; when absent, classes are assigned
    /// by ascending distinct radius at generation time.
    #[serde(default)]
    pub class_id: Option<u32>,
}

/// A full scene: pipes plus uniform outliers, seeded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub cylinders: Vec<CylinderSpec>,
    /// Outlier count = round(fraction x surface point count), scattered
    /// uniformly in the inflated scene bounding box.
    #[serde(default)]
    pub outlier_fraction: f64,
    pub seed: u64,
}

/// Ground truth for one generated pipe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipeTruth {
    pub pipe_id: usize,
    pub radius_m: f64,
    pub length_m: f64,
    pub class_id: u32,
    pub base: [f64; 3],
    pub axis: [f64; 3],
}

/// Generated scene: cloud, per-point labels (`Some(pipe index)` or `None`
/// for outliers), and the per-pipe truth table.
#[derive(Debug, Clone)]
pub struct LabeledScene {
    pub cloud: PointCloud,
    pub labels: Vec<Option<usize>>,
    pub truth: Vec<PipeTruth>,
}

impl CylinderSpec {
    fn validate(&self, idx: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("cylinder {idx}: {msg}")));
        if !(self.radius_m > 0.0) {
            return bad(format!("radius must be positive, got {}", self.radius_m));
        }
        if !(self.length_m > 0.0) {
            return bad(format!("length must be positive, got {}", self.length_m));
        }
        if !(self.visible_arc_deg > 0.0 && self.visible_arc_deg <= 360.0) {
            return bad(format!("visible arc must be in (0, 360], got {}", self.visible_arc_deg));
        }
        if !(self.density_pts_per_m2 > 0.0) {
            return bad(format!("density must be positive, got {}", self.density_pts_per_m2));
        }
        if !(self.noise_sigma_m >= 0.0) {
            return bad(format!("noise sigma must be >= 0, got {}", self.noise_sigma_m));
        }
        if Vec3::from(self.axis).norm() < 1e-12 {
            return bad("axis direction is zero".into());
        }
        Ok(())
    }

    fn axis_dir(&self) -> UnitVec3 {
        UnitVec3::new_normalize(Vec3::from(self.axis))
    }

    /// Visible surface area: arc fraction of the full lateral area.
    fn visible_area(&self) -> f64 {
        self.visible_arc_deg.to_radians() * self.radius_m * self.length_m
    }
}

/// Sample `n` points on a cylinder surface band. The band spans `arc_deg`
/// degrees centered on the first perpendicular basis direction of the axis;
/// noise is isotropic Gaussian per coordinate.
pub fn sample_cylinder_surface<R: Rng>(
    base: &Point3,
    axis: &UnitVec3,
    radius: f64,
    length: f64,
    arc_deg: f64,
    n: usize,
    noise_sigma: f64,
    rng: &mut R,
) -> Vec<Point3> {
    let (u, v) = perpendicular_basis(axis);
    let half_arc = arc_deg.to_radians() / 2.0;
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).expect("finite sigma");
    (0..n)
        .map(|_| {
            let t = rng.random::<f64>() * length;
            let phi = (rng.random::<f64>() * 2.0 - 1.0) * half_arc;
            let radial = u.into_inner() * phi.cos() + v.into_inner() * phi.sin();
            let mut p = base + axis.into_inner() * t + radial * radius;
            if noise_sigma > 0.0 {
                p += Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
            }
            p
        })
        .collect()
}

/// Generate a scene. Deterministic given the spec (including its seed):
/// every pipe and the outlier pass draw from independently derived streams.
pub fn sample_scene(spec: &SceneSpec) -> Result<LabeledScene> {
    if spec.cylinders.is_empty() {
        return Err(Error::InvalidInput("scene has no cylinders".into()));
    }
    if !(0.0..1.0).contains(&spec.outlier_fraction) {
        return Err(Error::InvalidInput(format!(
            "outlier fraction must be in [0, 1), got {}",
            spec.outlier_fraction
        )));
    }
    for (i, c) in spec.cylinders.iter().enumerate() {
        c.validate(i)?;
    }

    // Class ids: explicit where given, otherwise by ascending distinct radius.
    let assigned: Vec<u32> = {
        let mut radii: Vec<f64> = spec.cylinders.iter().map(|c| c.radius_m).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        spec.cylinders
            .iter()
            .map(|c| match c.class_id {
                Some(id) => id,
                None => radii
                    .iter()
                    .position(|r| (r - c.radius_m).abs() < 1e-12)
                    .expect("radius present") as u32,
            })
            .collect()
    };

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut truth = Vec::new();
    for (i, c) in spec.cylinders.iter().enumerate() {
        let n = (c.density_pts_per_m2 * c.visible_area()).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1 + i as u64));
        let base = Point3::from(Vec3::from(c.base));
        let pts = sample_cylinder_surface(
            &base,
            &c.axis_dir(),
            c.radius_m,
            c.length_m,
            c.visible_arc_deg,
            n,
            c.noise_sigma_m,
            &mut rng,
        );
        labels.extend(std::iter::repeat_n(Some(i), pts.len()));
        points.extend(pts);
        truth.push(PipeTruth {
            pipe_id: i,
            radius_m: c.radius_m,
            length_m: c.length_m,
            class_id: assigned[i],
            base: c.base,
            axis: c.axis_dir().into_inner().into(),
        });
    }

    let n_outliers = (spec.outlier_fraction * points.len() as f64).round() as usize;
    if n_outliers > 0 {
        let (min, max) = inflated_bbox(&points);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0));
        for _ in 0..n_outliers {
            points.push(Point3::new(
                min.x + rng.random::<f64>() * (max.x - min.x),
                min.y + rng.random::<f64>() * (max.y - min.y),
                min.z + rng.random::<f64>() * (max.z - min.z),
            ));
            labels.push(None);
        }
    }

    Ok(LabeledScene { cloud: PointCloud::metric(points)?, labels, truth })
}

/// Greedy one-to-one matching of detected cylinders to generated pipes.
///
/// A detection can claim a pipe when the axes agree within 10 degrees, the
/// detected axis passes within 1.5 true radii (at least 5 cm) of the true
/// axis line, and the radius is within 50% of truth. Pairs are claimed
/// closest-axis-first; the result maps each model to its truth index.
pub fn match_to_truth(
    models: &[crate::cylinder::CylinderModel],
    truth: &[PipeTruth],
) -> Vec<Option<usize>> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (mi, m) in models.iter().enumerate() {
        for (ti, t) in truth.iter().enumerate() {
            let axis = Vec3::new(t.axis[0], t.axis[1], t.axis[2]).normalize();
            let cos = m.axis.dot(&axis).abs().min(1.0);
            if cos.acos().to_degrees() > 10.0 {
                continue;
            }
            let base = Point3::new(t.base[0], t.base[1], t.base[2]);
            let w = m.axis_point - base;
            let dist = (w - axis * w.dot(&axis)).norm();
            if dist > (1.5 * t.radius_m).max(0.05) {
                continue;
            }
            if (m.radius - t.radius_m).abs() > 0.5 * t.radius_m {
                continue;
            }
            candidates.push((dist, mi, ti));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut assignment = vec![None; models.len()];
    let mut taken = vec![false; truth.len()];
    for (_, mi, ti) in candidates {
        if assignment[mi].is_none() && !taken[ti] {
            assignment[mi] = Some(ti);
            taken[ti] = true;
        }
    }
    assignment
}

/// Scene bounding box grown by 20% per side (at least 10 cm) so outliers
/// also land outside the pipes.
fn inflated_bbox(points: &[Point3]) -> (Point3, Point3) {
    let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        for k in 0..3 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    for k in 0..3 {
        let pad = (0.2 * (max[k] - min[k])).max(0.1);
        min[k] -= pad;
        max[k] += pad;
    }
    (min, max)
}
