use serde::Serialize;

use pipefit_core::frames::{
    default_ov_max, frames_from_bundle, network_overlap, optimize_frames, plan_iteration,
    read_manifest, similarities_from_bundle, FrameAction, IterationLog, OptimizeOptions,
    OptimizeStatus,
};
use pipefit_core::io::read_bundle;
use pipefit_core::synth::{simulated_backend, SimBackendSpec};
use pipefit_core::{Error, Result};

use crate::config::{Meta, RunConfig};
use crate::{FramesOptimizeArgs, FramesPlanArgs};

use super::{read_json, read_timestamps, write_json};

#[derive(Serialize)]
struct FrameState {
    frame_id: u32,
    timestamp_s: f64,
    registered: bool,
    /// Network overlap; absent for unregistered frames.
    #[serde(skip_serializing_if = "Option::is_none")]
    overlap: Option<f64>,
}

#[derive(Serialize)]
struct PlanOutput {
    meta: Meta,
    ov_min: f64,
    ov_max: f64,
    native_fps: f64,
    converged: bool,
    frames: Vec<FrameState>,
    actions: Vec<FrameAction>,
}

fn band(args_min: Option<f64>, args_max: Option<f64>, config: &RunConfig) -> (f64, f64) {
    let ov_min = args_min.or(config.ov_min).unwrap_or(0.90);
    let ov_max = args_max.or(config.ov_max).unwrap_or_else(|| default_ov_max(ov_min));
    (ov_min, ov_max)
}

pub fn plan(args: &FramesPlanArgs, config: &RunConfig) -> Result<u8> {
    let bundle = read_bundle(&args.bundle)?;
    let timestamps = read_timestamps(&args.timestamps)?;
    let (ov_min, ov_max) = band(args.ov_min, args.ov_max, config);
    let native_fps = args.fps.or(config.native_fps).ok_or_else(|| {
        Error::InvalidInput("native frame rate required (--fps or config native_fps)".into())
    })?;

    let frames = frames_from_bundle(&bundle, &timestamps)?;
    let similarities = similarities_from_bundle(&bundle);
    let plan = plan_iteration(&frames, &similarities, ov_min, ov_max, native_fps, 0)?;

    let states = frames
        .iter()
        .map(|f| FrameState {
            frame_id: f.frame_id,
            timestamp_s: f.timestamp_s,
            registered: f.registered,
            overlap: network_overlap(f).ok(),
        })
        .collect();

    write_json(
        &args.out,
        &PlanOutput {
            meta: Meta::new(config, None),
            ov_min,
            ov_max,
            native_fps,
            converged: plan.converged,
            frames: states,
            actions: plan.actions,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct OptimizeOutput {
    meta: Meta,
    video_id: String,
    ov_min: f64,
    ov_max: f64,
    status: OptimizeStatus,
    timestamps: Vec<f64>,
    iterations: Vec<IterationLog>,
}

pub fn optimize(args: &FramesOptimizeArgs, config: &RunConfig) -> Result<u8> {
    let manifest = read_manifest(&args.manifest)?;
    let spec: SimBackendSpec = read_json(&args.backend)?;
    let mut backend = simulated_backend(spec)?;
    let (ov_min, ov_max) = band(args.ov_min, args.ov_max, config);
    let options = OptimizeOptions {
        max_iters: args.max_iters.or(config.max_iters).unwrap_or(20),
        initial_fps: args.initial_fps.or(config.initial_fps),
    };

    let outcome = optimize_frames(&mut backend, &manifest, ov_min, Some(ov_max), &options)?;
    write_json(
        &args.out,
        &OptimizeOutput {
            meta: Meta::new(config, None),
            video_id: manifest.video_id,
            ov_min,
            ov_max,
            status: outcome.status,
            timestamps: outcome.timestamps,
            iterations: outcome.iterations,
        },
    )?;
    Ok(0)
}
