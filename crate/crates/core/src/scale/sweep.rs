//! How does scale accuracy depend on the number of views of the target?
//!
//! Repeatedly solves the scale from random view subsets of each size and
//! reports the induced error on a reference radius, which is how scale
//! error shows up in downstream measurements.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geom::Point2;
use crate::synth::derive_seed;
use crate::{Error, Result};

use super::{solve_scale, CameraView, SolveConfig, TargetBoard};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SweepRow {
    /// Number of views used per solve.
    pub k: usize,
    /// Solves attempted at this k.
    pub combinations: usize,
    /// Solves that returned an error.
    pub failures: usize,
    /// Mean absolute error a pipe of the reference radius would inherit, m.
    pub mean_abs_radius_error_m: f64,
    /// Spread (population std) of the signed radius error, m.
    pub std_radius_error_m: f64,
    /// Mean absolute relative scale error.
    pub mean_abs_scale_rel_error: f64,
}

/// Solve the scale from `n_combinations` random `k`-view subsets for each
/// `k`, and summarize the error against the known true scale.
///
/// `candidates` holds the per-view detected centers in raw pixels, parallel
/// to `views`. The radius error columns translate the relative scale error
/// onto `reference_radius_m`.
#[allow(clippy::too_many_arguments)]
pub fn view_count_sweep(
    views: &[CameraView],
    candidates: &[Vec<Point2>],
    board: &TargetBoard,
    reference_radius_m: f64,
    true_scale: f64,
    ks: &[usize],
    n_combinations: usize,
    seed: u64,
    cfg: &SolveConfig,
) -> Result<Vec<SweepRow>> {
    if views.len() != candidates.len() {
        return Err(Error::InvalidInput(format!(
            "{} views but {} candidate lists",
            views.len(),
            candidates.len()
        )));
    }
    if !(true_scale.is_finite() && true_scale > 0.0) {
        return Err(Error::InvalidInput("true scale must be positive".into()));
    }
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        if k < 2 || k > views.len() {
            return Err(Error::InvalidInput(format!(
                "subset size {k} out of range 2..={}",
                views.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
        let subsets: Vec<Vec<usize>> = (0..n_combinations)
            .map(|_| {
                let mut idx: Vec<usize> = (0..views.len()).collect();
                idx.shuffle(&mut rng);
                idx.truncate(k);
                idx.sort_unstable();
                idx
            })
            .collect();

        let scales: Vec<Result<f64>> = subsets
            .par_iter()
            .map(|subset| {
                let sub_views: Vec<CameraView> =
                    subset.iter().map(|&i| views[i].clone()).collect();
                let sub_cands: Vec<Vec<Point2>> =
                    subset.iter().map(|&i| candidates[i].clone()).collect();
                solve_scale(&sub_views, &sub_cands, board, cfg).map(|s| s.scale)
            })
            .collect();

        let errors: Vec<f64> = scales
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|s| reference_radius_m * (s / true_scale - 1.0))
            .collect();
        let failures = n_combinations - errors.len();
        let (mean_abs, std, rel) = if errors.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let n = errors.len() as f64;
            let mean_abs = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
            let mean = errors.iter().sum::<f64>() / n;
            let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
            let rel = errors.iter().map(|e| (e / reference_radius_m).abs()).sum::<f64>() / n;
            (mean_abs, var.sqrt(), rel)
        };
        rows.push(SweepRow {
            k,
            combinations: n_combinations,
            failures,
            mean_abs_radius_error_m: mean_abs,
            std_radius_error_m: std,
            mean_abs_scale_rel_error: rel,
        });
    }
    Ok(rows)
}
