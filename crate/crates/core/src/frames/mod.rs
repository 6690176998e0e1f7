//! Frame-set planning for video-based reconstruction.
//!
//! A reconstruction degrades both when neighboring frames share too little
//! image content (weak connectivity) and when far too many near-identical
//! frames inflate the solve. The measure used here is network overlap: the
//! fraction of a frame's feature-hull area covered by the hull of its tie
//! points. The planner nudges every frame into a target overlap band by
//! inserting frames into weak gaps and thinning oversampled stretches,
//! re-running the reconstruction backend between iterations.

mod link;
mod optimize;

pub use link::{frames_from_bundle, similarities_from_bundle};
pub use optimize::{
    default_ov_max, optimize_frames, read_manifest, write_manifest, IterationLog,
    OptimizeOptions, OptimizeOutcome, OptimizeStatus, ReconstructionBackend, VideoManifest,
};

use serde::{Deserialize, Serialize};

use crate::geom::{convex_hull_area, Point2};
use crate::{Error, Result};

/// One video frame in the current reconstruction attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: u32,
    pub timestamp_s: f64,
    /// Detected feature points, pixels.
    pub features: Vec<Point2>,
    /// Indices into `features` that participate in the sparse model.
    pub tie_indices: Vec<usize>,
    /// Whether the backend registered (posed) this frame.
    pub registered: bool,
}

impl FrameRecord {
    pub fn validate(&self) -> Result<()> {
        if self.timestamp_s < 0.0 || !self.timestamp_s.is_finite() {
            return Err(Error::InvalidInput(format!(
                "frame {}: bad timestamp {}",
                self.frame_id, self.timestamp_s
            )));
        }
        if let Some(&bad) = self.tie_indices.iter().find(|&&i| i >= self.features.len()) {
            return Err(Error::InvalidInput(format!(
                "frame {}: tie index {bad} out of range ({} features)",
                self.frame_id,
                self.features.len()
            )));
        }
        Ok(())
    }

    fn tie_points(&self) -> Vec<Point2> {
        self.tie_indices.iter().map(|&i| self.features[i]).collect()
    }
}

/// Matched-feature count between a pair of frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSimilarity {
    pub a: u32,
    pub b: u32,
    pub matches: usize,
}

/// Symmetric lookup; pairs without an entry count as zero matches.
pub fn matches_between(similarities: &[PairSimilarity], a: u32, b: u32) -> usize {
    similarities
        .iter()
        .find(|s| (s.a == a && s.b == b) || (s.a == b && s.b == a))
        .map(|s| s.matches)
        .unwrap_or(0)
}

/// Fraction of a frame's feature hull covered by its tie-point hull.
///
/// 1.0 means the sparse model uses the frame's whole field of view; values
/// near 0 mean the frame is barely connected to the model. Fewer than three
/// ties (or collinear ties) cover zero area.
pub fn network_overlap(frame: &FrameRecord) -> Result<f64> {
    if !frame.registered {
        return Err(Error::Unregistered { frame_id: frame.frame_id });
    }
    frame.validate()?;
    let feature_area = convex_hull_area(&frame.features)?;
    let ties = frame.tie_points();
    let tie_area = convex_hull_area(&ties).unwrap_or(0.0);
    Ok((tie_area / feature_area).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum FrameAction {
    /// Insert a frame between two existing consecutive frames.
    Add { between: (u32, u32), timestamp_s: f64 },
    Remove { frame_id: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub iteration: usize,
    /// Adds in frame order, then removes in frame order.
    pub actions: Vec<FrameAction>,
    /// True when no action was needed: every frame sits in the band.
    pub converged: bool,
}

/// One planning pass: adds for under-connected frames, removals for
/// oversampled stretches.
///
/// For every registered frame below `ov_min`, one frame is inserted next to
/// it, on the side with the weaker feature-match link (unregistered frames
/// get an insertion on both sides). Maximal runs of more than three
/// consecutive frames above `ov_max` are thinned by removing every second
/// frame of the run. Inserted timestamps snap to the native frame grid; a
/// gap with no native frame left in it makes the band unreachable.
pub fn plan_iteration(
    frames: &[FrameRecord],
    similarities: &[PairSimilarity],
    ov_min: f64,
    ov_max: f64,
    native_fps: f64,
    iteration: usize,
) -> Result<FramePlan> {
    if !(ov_min < ov_max) {
        return Err(Error::InvalidInput(format!(
            "overlap band is empty: min {ov_min} >= max {ov_max}"
        )));
    }
    if !(native_fps > 0.0 && native_fps.is_finite()) {
        return Err(Error::InvalidInput(format!("bad native fps {native_fps}")));
    }
    if frames.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "planning needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    for w in frames.windows(2) {
        if w[1].timestamp_s <= w[0].timestamp_s {
            return Err(Error::InvalidInput(format!(
                "frame timestamps not strictly increasing at frame {}",
                w[1].frame_id
            )));
        }
    }

    let overlaps: Vec<Option<f64>> = frames
        .iter()
        .map(|f| if f.registered { network_overlap(f).map(Some) } else { Ok(None) })
        .collect::<Result<_>>()?;

    // Requested insertion gaps, as left-frame indices.
    let mut add_gaps: Vec<usize> = Vec::new();
    let last = frames.len() - 1;
    for (i, f) in frames.iter().enumerate() {
        let left = (i > 0).then(|| i - 1);
        let right = (i < last).then_some(i);
        match overlaps[i] {
            None => {
                // No pose: strengthen both sides.
                add_gaps.extend(left);
                add_gaps.extend(right);
            }
            Some(ov) if ov < ov_min => {
                let pick = match (left, right) {
                    (Some(l), Some(r)) => {
                        let sim_l = matches_between(
                            similarities,
                            frames[l].frame_id,
                            f.frame_id,
                        );
                        let sim_r = matches_between(
                            similarities,
                            f.frame_id,
                            frames[r + 1].frame_id,
                        );
                        // Weaker link gets the new frame; ties go left.
                        if sim_l <= sim_r { l } else { r }
                    }
                    (Some(l), None) => l,
                    (None, Some(r)) => r,
                    (None, None) => unreachable!("len >= 2"),
                };
                add_gaps.push(pick);
            }
            Some(_) => {}
        }
    }
    add_gaps.sort_unstable();
    add_gaps.dedup();

    let mut actions = Vec::new();
    let mut add_adjacent: Vec<bool> = vec![false; frames.len()];
    for &g in &add_gaps {
        let lo = frames[g].timestamp_s;
        let hi = frames[g + 1].timestamp_s;
        let k_lo = (lo * native_fps + 1e-9).floor() as i64 + 1;
        let k_hi = (hi * native_fps - 1e-9).ceil() as i64 - 1;
        if k_lo > k_hi {
            return Err(Error::BandUnreachable(format!(
                "no native frame left between t={lo}s and t={hi}s (fps {native_fps})"
            )));
        }
        let mid = 0.5 * (lo + hi);
        let k = ((mid * native_fps).round() as i64).clamp(k_lo, k_hi);
        actions.push(FrameAction::Add {
            between: (frames[g].frame_id, frames[g + 1].frame_id),
            timestamp_s: k as f64 / native_fps,
        });
        add_adjacent[g] = true;
        add_adjacent[g + 1] = true;
    }

    // Maximal runs of frames above the band.
    let mut i = 0;
    while i < frames.len() {
        if overlaps[i].is_some_and(|ov| ov > ov_max) {
            let start = i;
            while i < frames.len() && overlaps[i].is_some_and(|ov| ov > ov_max) {
                i += 1;
            }
            let run_len = i - start;
            if run_len > 3 {
                for pos in (2..=run_len).step_by(2) {
                    let idx = start + pos - 1;
                    // Never remove a frame that an insertion leans on.
                    if !add_adjacent[idx] {
                        actions.push(FrameAction::Remove { frame_id: frames[idx].frame_id });
                    }
                }
            }
        } else {
            i += 1;
        }
    }

    let converged = actions.is_empty();
    Ok(FramePlan { iteration, actions, converged })
}
