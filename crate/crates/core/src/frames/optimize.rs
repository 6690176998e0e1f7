use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::Bundle;
use crate::{Error, Result};

use super::{
    frames_from_bundle, network_overlap, plan_iteration, similarities_from_bundle, FrameAction,
};

/// Source video description, read from a small JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoManifest {
    pub video_id: String,
    pub native_fps: f64,
    pub duration_s: f64,
    /// Sampling rate for the first reconstruction; defaults to 0.5 fps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_fps: Option<f64>,
}

impl VideoManifest {
    pub fn validate(&self) -> Result<()> {
        if !(self.native_fps > 0.0 && self.native_fps.is_finite()) {
            return Err(Error::InvalidInput(format!("bad native_fps {}", self.native_fps)));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidInput(format!("bad duration_s {}", self.duration_s)));
        }
        if let Some(fps) = self.initial_fps {
            if !(fps > 0.0 && fps <= self.native_fps) {
                return Err(Error::InvalidInput(format!(
                    "initial_fps {fps} outside (0, native_fps]"
                )));
            }
        }
        Ok(())
    }
}

pub fn read_manifest(path: &Path) -> Result<VideoManifest> {
    let text = std::fs::read_to_string(path)?;
    let manifest: VideoManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &VideoManifest) -> Result<()> {
    manifest.validate()?;
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Produces a sparse reconstruction for a set of frame timestamps.
pub trait ReconstructionBackend {
    fn reconstruct(&mut self, timestamps: &[f64]) -> Result<Bundle>;
}

impl<F> ReconstructionBackend for F
where
    F: FnMut(&[f64]) -> Result<Bundle>,
{
    fn reconstruct(&mut self, timestamps: &[f64]) -> Result<Bundle> {
        self(timestamps)
    }
}

/// Band ceiling when the caller only picks a floor.
pub fn default_ov_max(ov_min: f64) -> f64 {
    ov_min + 0.025
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    /// Hard cap on backend invocations.
    pub max_iters: usize,
    /// Overrides the manifest's initial sampling rate.
    pub initial_fps: Option<f64>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { max_iters: 20, initial_fps: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeStatus {
    /// Every registered frame sits inside the overlap band.
    Converged,
    /// Stopped at the iteration cap or on an oscillating plan.
    IterationCap,
    /// The band cannot be met with the frames the video has.
    BandUnreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub frame_count: usize,
    pub min_overlap: Option<f64>,
    pub max_overlap: Option<f64>,
    pub added: usize,
    pub removed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub timestamps: Vec<f64>,
    pub status: OptimizeStatus,
    pub iterations: Vec<IterationLog>,
}

fn signature(timestamps: &[f64]) -> Vec<u64> {
    timestamps.iter().map(|t| t.to_bits()).collect()
}

/// Iterates reconstruct -> measure overlap -> adjust frame set until every
/// frame's network overlap lands in `[ov_min, ov_max]`.
///
/// The backend is called at most `max_iters` times. A plan that revisits an
/// earlier frame set would loop forever, so it stops as `IterationCap`.
pub fn optimize_frames(
    backend: &mut dyn ReconstructionBackend,
    manifest: &VideoManifest,
    ov_min: f64,
    ov_max: Option<f64>,
    options: &OptimizeOptions,
) -> Result<OptimizeOutcome> {
    manifest.validate()?;
    let ov_max = ov_max.unwrap_or_else(|| default_ov_max(ov_min));
    if options.max_iters == 0 {
        return Err(Error::InvalidInput("max_iters must be positive".into()));
    }
    let fps0 = options.initial_fps.or(manifest.initial_fps).unwrap_or(0.5);
    if !(fps0 > 0.0 && fps0 <= manifest.native_fps) {
        return Err(Error::InvalidInput(format!("initial fps {fps0} outside (0, native_fps]")));
    }

    // Initial sampling, snapped onto the native frame grid.
    let mut timestamps = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 / fps0;
        if t > manifest.duration_s + 1e-9 {
            break;
        }
        let snapped = (t * manifest.native_fps).round() / manifest.native_fps;
        if timestamps.last() != Some(&snapped) {
            timestamps.push(snapped);
        }
        k += 1;
    }
    if timestamps.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "initial sampling yields {} frame(s); need at least 2",
            timestamps.len()
        )));
    }

    let mut visited: HashSet<Vec<u64>> = HashSet::new();
    visited.insert(signature(&timestamps));
    let mut logs = Vec::new();
    let mut status = OptimizeStatus::IterationCap;

    for iteration in 1..=options.max_iters {
        let bundle = backend.reconstruct(&timestamps).map_err(|e| Error::BackendFailure {
            iteration,
            message: e.to_string(),
        })?;
        let frames = frames_from_bundle(&bundle, &timestamps)?;
        let sims = similarities_from_bundle(&bundle);

        let overlaps: Vec<f64> = frames
            .iter()
            .filter(|f| f.registered)
            .map(network_overlap)
            .collect::<Result<_>>()?;
        let min_ov = overlaps.iter().cloned().fold(None, |m: Option<f64>, v| {
            Some(m.map_or(v, |m| m.min(v)))
        });
        let max_ov = overlaps.iter().cloned().fold(None, |m: Option<f64>, v| {
            Some(m.map_or(v, |m| m.max(v)))
        });

        let plan = match plan_iteration(&frames, &sims, ov_min, ov_max, manifest.native_fps, iteration)
        {
            Ok(plan) => plan,
            Err(Error::BandUnreachable(_)) => {
                logs.push(IterationLog {
                    iteration,
                    frame_count: frames.len(),
                    min_overlap: min_ov,
                    max_overlap: max_ov,
                    added: 0,
                    removed: 0,
                });
                status = OptimizeStatus::BandUnreachable;
                break;
            }
            Err(e) => return Err(e),
        };

        let mut added = Vec::new();
        let mut removed: HashSet<u32> = HashSet::new();
        for action in &plan.actions {
            match action {
                FrameAction::Add { timestamp_s, .. } => added.push(*timestamp_s),
                FrameAction::Remove { frame_id } => {
                    removed.insert(*frame_id);
                }
            }
        }
        logs.push(IterationLog {
            iteration,
            frame_count: frames.len(),
            min_overlap: min_ov,
            max_overlap: max_ov,
            added: added.len(),
            removed: removed.len(),
        });

        if plan.converged {
            status = OptimizeStatus::Converged;
            break;
        }

        let mut next: Vec<f64> = timestamps
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(&(*i as u32)))
            .map(|(_, &t)| t)
            .collect();
        next.extend(added);
        next.sort_by(|a, b| a.total_cmp(b));
        debug_assert!(next.windows(2).all(|w| w[0] < w[1]), "plan produced duplicate timestamps");
        timestamps = next;

        if !visited.insert(signature(&timestamps)) {
            // The plan cycled back to an earlier frame set.
            status = OptimizeStatus::IterationCap;
            break;
        }
    }

    Ok(OptimizeOutcome { timestamps, status, iterations: logs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{simulated_backend, SimBackendSpec};
    use approx::assert_relative_eq;

    fn curve_spec(response: Vec<(f64, f64)>, sigma: f64) -> SimBackendSpec {
        SimBackendSpec { base_features: 60, response, noise_sigma: sigma, seed: 11 }
    }

    fn manifest(duration_s: f64, initial_fps: f64) -> VideoManifest {
        VideoManifest {
            video_id: "clip".into(),
            native_fps: 60.0,
            duration_s,
            initial_fps: Some(initial_fps),
        }
    }

    fn standard_curve() -> Vec<(f64, f64)> {
        vec![(1.0 / 60.0, 0.97), (0.5, 0.95), (1.0, 0.9125), (2.0, 0.85), (4.0, 0.70)]
    }

    #[test]
    fn manifest_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.json");
        let m = manifest(20.0, 0.5);
        write_manifest(&path, &m).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), m);

        std::fs::write(&path, r#"{"video_id":"x","native_fps":60,"duration_s":5,"fps":1}"#)
            .unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::Parse { .. })));

        let bad = VideoManifest { native_fps: 0.0, ..m };
        assert!(write_manifest(&path, &bad).is_err());
    }

    #[test]
    fn sparse_start_converges_by_insertion() {
        let mut backend = simulated_backend(curve_spec(standard_curve(), 0.0)).unwrap();
        let outcome = optimize_frames(
            &mut backend,
            &manifest(20.0, 0.5),
            0.90,
            Some(0.925),
            &OptimizeOptions::default(),
        )
        .unwrap();
        assert_eq!(outcome.status, OptimizeStatus::Converged);
        assert!(outcome.iterations.len() <= 10);
        // 2s gaps get a midpoint each: 11 frames become 21 at 1s spacing.
        assert_eq!(outcome.timestamps.len(), 21);
        for w in outcome.timestamps.windows(2) {
            assert_relative_eq!(w[1] - w[0], 1.0, epsilon = 1e-9);
        }
        let last = outcome.iterations.last().unwrap();
        assert!(last.min_overlap.unwrap() >= 0.90);
        assert!(last.max_overlap.unwrap() <= 0.925);
    }

    #[test]
    fn dense_start_converges_by_removal() {
        let mut backend = simulated_backend(curve_spec(standard_curve(), 0.0)).unwrap();
        let outcome = optimize_frames(
            &mut backend,
            &manifest(20.0, 2.0),
            0.90,
            Some(0.925),
            &OptimizeOptions::default(),
        )
        .unwrap();
        assert_eq!(outcome.status, OptimizeStatus::Converged);
        assert_eq!(outcome.timestamps.len(), 21);
        assert!(outcome.iterations[0].removed > 0);
        assert_eq!(outcome.iterations[0].added, 0);
    }

    #[test]
    fn default_band_ceiling() {
        assert_relative_eq!(default_ov_max(0.90), 0.925);
        let mut backend = simulated_backend(curve_spec(standard_curve(), 0.0)).unwrap();
        let outcome =
            optimize_frames(&mut backend, &manifest(20.0, 0.5), 0.90, None, &OptimizeOptions::default())
                .unwrap();
        assert_eq!(outcome.status, OptimizeStatus::Converged);
    }

    #[test]
    fn weak_footage_reports_band_unreachable() {
        // Response tops out below the band floor; insertion can never help.
        let mut backend = simulated_backend(curve_spec(vec![(1.0, 0.80)], 0.0)).unwrap();
        let outcome = optimize_frames(
            &mut backend,
            &manifest(2.0, 0.5),
            0.90,
            Some(0.925),
            &OptimizeOptions::default(),
        )
        .unwrap();
        assert_eq!(outcome.status, OptimizeStatus::BandUnreachable);
        assert!(outcome.iterations.len() <= 20);
    }

    #[test]
    fn oscillating_plans_stop_early() {
        // Alternating backends: odd calls starve every frame (forcing adds),
        // even calls saturate every frame (forcing removals that undo them).
        let mut lean = simulated_backend(curve_spec(vec![(1.0, 0.5)], 0.0)).unwrap();
        let mut rich = simulated_backend(curve_spec(vec![(1.0, 0.96)], 0.0)).unwrap();
        let mut calls = 0usize;
        let mut backend = |ts: &[f64]| {
            calls += 1;
            if calls % 2 == 1 {
                lean.reconstruct(ts)
            } else {
                rich.reconstruct(ts)
            }
        };
        let outcome = optimize_frames(
            &mut backend,
            &manifest(6.0, 1.0),
            0.90,
            Some(0.925),
            &OptimizeOptions::default(),
        )
        .unwrap();
        assert_eq!(outcome.status, OptimizeStatus::IterationCap);
        assert_eq!(calls, 2, "cycle must be caught on first revisit");
    }

    #[test]
    fn backend_call_count_never_exceeds_cap() {
        let mut inner = simulated_backend(curve_spec(vec![(1.0, 0.5)], 0.0)).unwrap();
        let mut calls = 0usize;
        let mut backend = |ts: &[f64]| {
            calls += 1;
            inner.reconstruct(ts)
        };
        let high_fps = VideoManifest {
            video_id: "clip".into(),
            native_fps: 6000.0,
            duration_s: 4.0,
            initial_fps: Some(0.5),
        };
        let opts = OptimizeOptions { max_iters: 3, ..OptimizeOptions::default() };
        let outcome =
            optimize_frames(&mut backend, &high_fps, 0.90, Some(0.925), &opts).unwrap();
        assert_eq!(outcome.status, OptimizeStatus::IterationCap);
        assert_eq!(calls, 3);
    }

    #[test]
    fn backend_failures_carry_the_iteration() {
        let mut inner = simulated_backend(curve_spec(vec![(1.0, 0.5)], 0.0)).unwrap();
        let mut calls = 0usize;
        let mut backend = |ts: &[f64]| {
            calls += 1;
            if calls == 2 {
                return Err(Error::InvalidInput("tracker diverged".into()));
            }
            inner.reconstruct(ts)
        };
        let err = optimize_frames(
            &mut backend,
            &manifest(8.0, 0.5),
            0.90,
            Some(0.925),
            &OptimizeOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::BackendFailure { iteration, message } => {
                assert_eq!(iteration, 2);
                assert!(message.contains("tracker diverged"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn added_frames_stay_on_the_native_grid() {
        let mut backend = simulated_backend(curve_spec(standard_curve(), 0.0)).unwrap();
        let outcome = optimize_frames(
            &mut backend,
            &manifest(20.0, 0.5),
            0.90,
            Some(0.925),
            &OptimizeOptions::default(),
        )
        .unwrap();
        for &t in &outcome.timestamps {
            let k = t * 60.0;
            assert_relative_eq!(k, k.round(), epsilon = 1e-6);
        }
    }
}
