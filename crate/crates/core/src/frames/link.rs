use std::collections::{BTreeMap, HashSet};

use crate::geom::Point2;
use crate::io::Bundle;
use crate::{Error, Result};

use super::{FrameRecord, PairSimilarity};

/// Build frame records from a reconstruction bundle.
///
/// Frame ids are timestamp indices; a bundle view with id `i` poses the
/// frame at `timestamps[i]`. Frames without a view are unregistered and
/// carry whatever features were detected for them, possibly none.
pub fn frames_from_bundle(bundle: &Bundle, timestamps: &[f64]) -> Result<Vec<FrameRecord>> {
    for w in timestamps.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidInput(format!(
                "timestamps not strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
    }
    let mut frames = Vec::with_capacity(timestamps.len());
    for (i, &t) in timestamps.iter().enumerate() {
        let frame_id = i as u32;
        let registered = bundle.view(frame_id).is_some();
        let file_features = bundle.features.get(&frame_id);
        if registered && file_features.is_none_or(|f| f.is_empty()) {
            return Err(Error::InvalidInput(format!(
                "registered frame {frame_id} has no feature points"
            )));
        }
        let features: Vec<Point2> = file_features
            .map(|f| f.iter().map(|p| Point2::new(p.x, p.y)).collect())
            .unwrap_or_default();
        let tie_kps: HashSet<u32> = bundle.tie_point_indices(frame_id).into_iter().collect();
        let tie_indices: Vec<usize> = file_features
            .map(|f| {
                f.iter()
                    .enumerate()
                    .filter(|(_, p)| tie_kps.contains(&p.kp_index))
                    .map(|(idx, _)| idx)
                    .collect()
            })
            .unwrap_or_default();
        frames.push(FrameRecord { frame_id, timestamp_s: t, features, tie_indices, registered });
    }
    Ok(frames)
}

/// Matched-feature counts between view pairs: the number of model points
/// tracked in both views.
pub fn similarities_from_bundle(bundle: &Bundle) -> Vec<PairSimilarity> {
    let mut counts: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for point in &bundle.points {
        let mut views: Vec<u32> = point.track.iter().map(|&(v, _)| v).collect();
        views.sort_unstable();
        views.dedup();
        for i in 0..views.len() {
            for j in i + 1..views.len() {
                *counts.entry((views[i], views[j])).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|((a, b), matches)| PairSimilarity { a, b, matches })
        .collect()
}
