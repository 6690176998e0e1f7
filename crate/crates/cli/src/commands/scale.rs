use serde::Serialize;

use pipefit_core::geom::Point2;
use pipefit_core::io::{read_bundle, read_pgm};
use pipefit_core::scale::{
    detect_target_ellipses, read_board, solve_scale, views_from_bundle, SolveConfig,
    TargetDetectConfig,
};
use pipefit_core::{Error, Result};

use crate::config::{Meta, RunConfig};
use crate::ScaleArgs;

use super::write_json;

#[derive(Serialize)]
struct TargetReport {
    /// Board index of the circle.
    index: usize,
    center_recon: Option<[f64; 3]>,
    rms_px: Option<f64>,
}

#[derive(Serialize)]
struct ScaleOutput {
    meta: Meta,
    board_id: String,
    views_used: usize,
    scale: f64,
    preliminary_scale: f64,
    matched_targets: usize,
    eccentricity_applied: bool,
    mean_eccentricity_shift_px: f64,
    match_score: f64,
    match_runner_up: f64,
    targets: Vec<TargetReport>,
}

pub fn run(args: &ScaleArgs, config: &RunConfig) -> Result<u8> {
    let bundle = read_bundle(&args.bundle)?;
    let views = views_from_bundle(&bundle)?;
    if views.len() < 2 {
        return Err(Error::InsufficientViews { needed: 2, got: views.len() });
    }
    let board = read_board(&args.board)?;

    let mut detect_cfg = TargetDetectConfig::default();
    if let Some(v) = config.target_min_area_px {
        detect_cfg.min_area_px = v;
    }
    if let Some(v) = config.target_max_rms_px {
        detect_cfg.max_rms_px = v;
    }

    let mut candidates: Vec<Vec<Point2>> = Vec::with_capacity(views.len());
    for view in &views {
        let path = args.images.join(format!("view_{}.pgm", view.view_id));
        if !path.is_file() {
            return Err(Error::InvalidInput(format!(
                "no raster for registered view {}: expected {}",
                view.view_id,
                path.display()
            )));
        }
        let image = read_pgm(&path)?;
        let found = detect_target_ellipses(&image, &detect_cfg)?;
        candidates.push(found.iter().map(|c| c.center()).collect());
    }

    let correct = !(args.no_eccentricity || config.no_eccentricity.unwrap_or(false));
    let solution = solve_scale(&views, &candidates, &board, &SolveConfig {
        correct_eccentricity: correct,
    })?;

    let targets = solution
        .centers_recon
        .iter()
        .zip(&solution.per_target_rms_px)
        .enumerate()
        .map(|(index, (center, rms))| TargetReport {
            index,
            center_recon: center.map(|p| [p.x, p.y, p.z]),
            rms_px: *rms,
        })
        .collect();

    write_json(
        &args.out,
        &ScaleOutput {
            meta: Meta::new(config, None),
            board_id: board.board_id.clone(),
            views_used: views.len(),
            scale: solution.scale,
            preliminary_scale: solution.preliminary_scale,
            matched_targets: solution.matched_targets,
            eccentricity_applied: solution.eccentricity_applied,
            mean_eccentricity_shift_px: solution.mean_eccentricity_shift_px,
            match_score: solution.match_score,
            match_runner_up: solution.match_runner_up,
            targets,
        },
    )?;
    Ok(0)
}
