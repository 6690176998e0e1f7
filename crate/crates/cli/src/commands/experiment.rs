//! Canned parameter sweeps over synthetic data, reported as CSV.

use std::fmt::Write as _;

use pipefit_core::cylinder::{detect_all, SeedPlaneSpec};
use pipefit_core::geom::{Plane, Point3, Vec3};
use pipefit_core::progress::{detection_quality, radius_rmse, DetectionCounts};
use pipefit_core::scale::{view_count_sweep, CameraView, Intrinsics, SolveConfig, TargetBoard};
use pipefit_core::synth::{
    analytic_board_observations, match_to_truth, sample_scene, CylinderSpec, SceneSpec,
};
use pipefit_core::{Error, Result};

use crate::config::{Meta, RunConfig};
use crate::ExperimentArgs;

/// Asymmetric five-target board (no two inter-center distances repeat), so
/// view-to-board matching has a unique answer.
fn experiment_board() -> TargetBoard {
    TargetBoard {
        board_id: "exp-board-a5".into(),
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

fn scaled_board(board: &TargetBoard, factor: f64) -> TargetBoard {
    TargetBoard {
        board_id: board.board_id.clone(),
        circle_radius_m: board.circle_radius_m * factor,
        centers_m: board
            .centers_m
            .iter()
            .map(|c| [c[0] * factor, c[1] * factor, c[2] * factor])
            .collect(),
    }
}

/// Camera ring over the board: an arc at 2.2 m with a little out-of-plane
/// wobble so no view subset is degenerate.
fn ring_views(n: usize, target_m: Point3, scale_to_recon: f64) -> Vec<CameraView> {
    let intr = Intrinsics::Pinhole { f: 2400.0, cx: 1280.0, cy: 960.0 };
    (0..n)
        .map(|i| {
            let t = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
            let theta = -0.9 + 1.8 * t;
            let dir = Vec3::new(
                theta.sin(),
                0.18 * (2.3 * theta + 0.7).sin(),
                theta.cos(),
            );
            let center_m = target_m + 2.2 * dir;
            CameraView::looking_at(
                i as u32,
                center_m * scale_to_recon,
                target_m * scale_to_recon,
                Vec3::y(),
                intr,
            )
        })
        .collect()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn scale_views(args: &ExperimentArgs, config: &RunConfig) -> Result<u8> {
    let seed = args.seed.or(config.seed).unwrap_or(7);
    let n_views = config.exp_views.unwrap_or(12);
    if n_views < 2 {
        return Err(Error::InvalidInput("exp_views must be at least 2".into()));
    }
    let true_scale = config.exp_true_scale.unwrap_or(0.025);
    if !(true_scale.is_finite() && true_scale > 0.0) {
        return Err(Error::InvalidInput("exp_true_scale must be positive".into()));
    }
    let noise = config.noise_sigma_px.unwrap_or(0.1);
    let combinations = config.exp_combinations.unwrap_or(20);
    let ks: Vec<usize> = config
        .exp_ks
        .clone()
        .unwrap_or_else(|| vec![2, 3, 4, 5, 6, 8, 10, 12])
        .into_iter()
        .filter(|&k| k <= n_views)
        .collect();
    if ks.is_empty() {
        return Err(Error::InvalidInput("no view counts to sweep".into()));
    }

    let board = experiment_board();
    let centroid = board.centers().iter().map(|p| p.coords).sum::<Vec3>()
        / board.centers_m.len() as f64;
    // Cameras and observations live in the unscaled reconstruction frame;
    // the board stays metric so the solved scale should equal `true_scale`.
    let views = ring_views(n_views, Point3::from(centroid), 1.0 / true_scale);
    let recon_board = scaled_board(&board, 1.0 / true_scale);
    let candidates = analytic_board_observations(&recon_board, &views, noise, seed)?;

    let cfg = SolveConfig { correct_eccentricity: !config.no_eccentricity.unwrap_or(false) };
    let reference_radius_m = 0.0575;
    let rows = view_count_sweep(
        &views,
        &candidates,
        &board,
        reference_radius_m,
        true_scale,
        &ks,
        combinations,
        seed,
        &cfg,
    )?;

    let meta = Meta::new(config, Some(seed));
    let mut csv = meta.csv_comment();
    csv.push('\n');
    csv.push_str(
        "k,combinations,failures,mean_abs_radius_error_m,std_radius_error_m,mean_abs_scale_rel_error\n",
    );
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.k,
            r.combinations,
            r.failures,
            r.mean_abs_radius_error_m,
            r.std_radius_error_m,
            r.mean_abs_scale_rel_error
        )
        .expect("string write");
    }
    std::fs::write(&args.out, csv)?;
    Ok(0)
}

/// Six-pipe yard scene; radii follow common DN50..DN200 steel pipe sizes.
fn yard_scene(density: f64, seed: u64) -> SceneSpec {
    let radii_mm = [8.6, 36.5, 36.5, 57.5, 84.1, 109.5];
    let cylinders = radii_mm
        .iter()
        .enumerate()
        .map(|(i, r)| CylinderSpec {
            radius_m: r / 1000.0,
            axis: [0.0, 0.0, 1.0],
            base: [0.45 * i as f64, 0.0, 0.0],
            length_m: 2.4,
            visible_arc_deg: 240.0,
            density_pts_per_m2: density,
            noise_sigma_m: 0.002,
            class_id: None,
        })
        .collect();
    SceneSpec { cylinders, outlier_fraction: 0.02, seed }
}

pub fn overlap_detection(args: &ExperimentArgs, config: &RunConfig) -> Result<u8> {
    let seed = args.seed.or(config.seed).unwrap_or(7);
    let overlaps = config
        .exp_overlaps_percent
        .clone()
        .unwrap_or_else(|| vec![70.0, 75.0, 80.0, 85.0, 90.0, 95.0]);
    let base_density = config.exp_density_pts_per_m2.unwrap_or(120_000.0);
    let detect_cfg = config.detect_config()?;
    let plane = Plane::new(Vec3::z(), -1.2)?;

    let meta = Meta::new(config, Some(seed));
    let mut csv = meta.csv_comment();
    csv.push('\n');
    csv.push_str(
        "overlap_percent,density_pts_per_m2,true_count,detected,tp,fp,fn,precision,recall,f_measure,radius_rmse_mm\n",
    );

    for (row_idx, &ov) in overlaps.iter().enumerate() {
        if !(50.0 < ov && ov <= 100.0) {
            return Err(Error::InvalidInput(format!(
                "overlap percent must be in (50, 100], got {ov}"
            )));
        }
        // Cloud completeness falls off with image overlap: points on a
        // surface need enough covering views, and view count per point
        // shrinks roughly with the square of the shared image fraction.
        let factor = ((ov - 50.0) / 45.0).powi(2);
        let density = base_density * factor;
        let scene = sample_scene(&yard_scene(density, seed.wrapping_add(row_idx as u64)))?;

        let detection = detect_all(&scene.cloud, &SeedPlaneSpec::Explicit(plane), &detect_cfg)?;
        let assigned = match_to_truth(&detection.models, &scene.truth);

        let tp = assigned.iter().filter(|a| a.is_some()).count();
        let fp = assigned.len() - tp;
        let missed = scene.truth.len() - tp;
        let quality = detection_quality(&DetectionCounts {
            true_positive: tp as u64,
            false_positive: fp as u64,
            false_negative: missed as u64,
            true_negative: None,
        });

        let matched: Vec<(f64, f64)> = detection
            .models
            .iter()
            .zip(&assigned)
            .filter_map(|(m, a)| a.map(|ti| (m.radius, scene.truth[ti].radius_m)))
            .collect();
        let rmse_mm = radius_rmse(&matched).ok().map(|v| v * 1000.0);

        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            ov,
            density,
            scene.truth.len(),
            detection.models.len(),
            tp,
            fp,
            missed,
            opt_cell(quality.precision),
            opt_cell(quality.recall),
            opt_cell(quality.f_measure),
            opt_cell(rmse_mm),
        )
        .expect("string write");
    }
    std::fs::write(&args.out, csv)?;
    Ok(0)
}
