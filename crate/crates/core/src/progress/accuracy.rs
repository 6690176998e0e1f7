use rayon::prelude::*;

use crate::geom::{Point3, PointCloud};
use crate::spatial::KdTree;
use crate::{Error, Result};

use super::registration::{register_similarity, SimilarityTransform};

#[derive(Debug, Clone)]
pub struct CloudAccuracyOptions {
    /// Nearest-neighbor distances beyond this are treated as non-overlap
    /// and dropped from the statistics.
    pub cutoff_m: f64,
    /// Set false to compare the clouds as-is (correspondences ignored).
    pub register: bool,
    /// Evaluate only these source indices, e.g. to compare different
    /// reconstructions over the same physical region.
    pub source_subset: Option<Vec<usize>>,
}

impl Default for CloudAccuracyOptions {
    fn default() -> Self {
        CloudAccuracyOptions { cutoff_m: 0.10, register: true, source_subset: None }
    }
}

#[derive(Debug, Clone)]
pub struct CloudAccuracy {
    pub mean_m: f64,
    pub rmse_m: f64,
    pub used_points: usize,
    pub dropped_points: usize,
    /// The registration that was applied, when enabled.
    pub transform: Option<SimilarityTransform>,
}

/// Cloud-to-cloud accuracy: register the source onto the reference, pair
/// every source point with its nearest reference point, and report mean
/// and RMS distance over pairs within the cutoff.
pub fn cloud_accuracy(
    source: &PointCloud,
    reference: &PointCloud,
    correspondences: &[(Point3, Point3)],
    options: &CloudAccuracyOptions,
) -> Result<CloudAccuracy> {
    if !(options.cutoff_m > 0.0 && options.cutoff_m.is_finite()) {
        return Err(Error::InvalidInput(format!("bad cutoff {}", options.cutoff_m)));
    }
    if reference.points.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }
    let transform = if options.register {
        Some(register_similarity(correspondences)?)
    } else {
        None
    };

    let selected: Vec<Point3> = match &options.source_subset {
        Some(subset) => {
            if let Some(&bad) = subset.iter().find(|&&i| i >= source.points.len()) {
                return Err(Error::InvalidInput(format!(
                    "subset index {bad} out of range ({} source points)",
                    source.points.len()
                )));
            }
            subset.iter().map(|&i| source.points[i]).collect()
        }
        None => source.points.clone(),
    };
    if selected.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }

    let tree = KdTree::build(&reference.points);
    let distances: Vec<Option<f64>> = selected
        .par_iter()
        .map(|p| {
            let q = transform.as_ref().map_or(*p, |t| t.apply(p));
            let (_, d2) = tree.nearest(&q).expect("non-empty reference");
            let d = d2.sqrt();
            (d <= options.cutoff_m).then_some(d)
        })
        .collect();

    let kept: Vec<f64> = distances.iter().flatten().copied().collect();
    let dropped = distances.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let rmse = (kept.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    Ok(CloudAccuracy {
        mean_m: mean,
        rmse_m: rmse,
        used_points: kept.len(),
        dropped_points: dropped,
        transform,
    })
}
