//! Cross-view association of detected targets and their labeling against
//! the board layout.
//!
//! Two stages. First, candidates are grouped across views by geometric
//! consistency: the view with the most candidates anchors one cluster per
//! candidate, and every other view is assigned to clusters by exhaustive
//! injective matching scored with two-view triangulation reprojection
//! error. Second, the clusters are labeled with board indices by exhaustive
//! assignment scored on pairwise distance ratios, which are invariant under
//! the unknown similarity between reconstruction and board frames. A board
//! whose distance structure admits two near-equally good labelings (e.g.
//! any mirror-symmetric layout) is reported as ambiguous rather than
//! guessed at.

use crate::geom::{Point2, Point3};
use crate::{Error, Result};

use super::camera::CameraView;
use super::triangulate::{reprojection_rms, triangulate_point};
use super::TargetBoard;

/// A candidate pair across two views is accepted only when the triangulated
/// point reprojects within this tolerance.
pub const MAX_PAIR_RMS_PX: f64 = 2.0;
/// Labelings whose scores differ by less than this factor are ambiguous.
pub const AMBIGUITY_FACTOR: f64 = 1.1;

const MAX_ENUM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatches {
    /// Per board circle: the (view index, candidate index) observations.
    /// Unmatched board circles get an empty list.
    pub assignments: Vec<Vec<(usize, usize)>>,
    /// Per board circle: triangulated center in the reconstruction frame.
    pub centers_recon: Vec<Option<Point3>>,
    /// Distance-ratio spread of the winning labeling.
    pub best_score: f64,
    /// Spread of the second-best labeling.
    pub runner_up_score: f64,
}

/// All ordered selections of `k` distinct values from `0..n`.
fn injections(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    let mut used = vec![false; n];
    fn rec(n: usize, k: usize, used: &mut [bool], current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                current.push(i);
                rec(n, k, used, current, out);
                current.pop();
                used[i] = false;
            }
        }
    }
    rec(n, k, &mut used, &mut current, &mut out);
    out
}

fn pair_rms(
    ref_view: &CameraView,
    ref_center: Point2,
    other_view: &CameraView,
    other_center: Point2,
) -> f64 {
    let obs = [(ref_view, ref_center), (other_view, other_center)];
    match triangulate_point(&obs) {
        Ok(x) => reprojection_rms(&obs, &x),
        Err(_) => f64::INFINITY,
    }
}

/// Associate per-view candidate centers (undistorted pixels) across views
/// and label them with board circle indices.
pub fn match_targets(
    views: &[CameraView],
    candidates: &[Vec<Point2>],
    board: &TargetBoard,
) -> Result<TargetMatches> {
    if views.len() != candidates.len() {
        return Err(Error::InvalidInput(format!(
            "{} views but {} candidate lists",
            views.len(),
            candidates.len()
        )));
    }
    if views.len() < 2 {
        return Err(Error::InsufficientViews { needed: 2, got: views.len() });
    }

    // Reference view: most candidates, ties broken by lowest view id.
    let ref_idx = (0..views.len())
        .max_by(|&a, &b| {
            candidates[a]
                .len()
                .cmp(&candidates[b].len())
                .then(views[b].view_id.cmp(&views[a].view_id))
        })
        .expect("nonempty views");
    let nr = candidates[ref_idx].len();
    if nr == 0 {
        return Err(Error::NoTargetsFound);
    }
    if nr > MAX_ENUM {
        return Err(Error::InvalidInput(format!(
            "{nr} candidates in the reference view exceed the matching limit of {MAX_ENUM}"
        )));
    }

    let mut clusters: Vec<Vec<(usize, usize)>> = (0..nr).map(|c| vec![(ref_idx, c)]).collect();

    let mut order: Vec<usize> = (0..views.len()).filter(|&v| v != ref_idx).collect();
    order.sort_by_key(|&v| views[v].view_id);
    for v in order {
        let nv = candidates[v].len();
        if nv == 0 {
            continue;
        }
        if nv > MAX_ENUM {
            return Err(Error::InvalidInput(format!(
                "{nv} candidates in view {} exceed the matching limit of {MAX_ENUM}",
                views[v].view_id
            )));
        }
        let mut cost = vec![vec![0.0; nr]; nv];
        for (cv, row) in cost.iter_mut().enumerate() {
            for (cr, slot) in row.iter_mut().enumerate() {
                *slot = pair_rms(
                    &views[ref_idx],
                    candidates[ref_idx][cr],
                    &views[v],
                    candidates[v][cv],
                );
            }
        }
        // Pairs of (view candidate, cluster) induced by the best injective
        // assignment of the smaller side into the larger.
        let assignment: Vec<(usize, usize)> = if nv <= nr {
            injections(nr, nv)
                .into_iter()
                .map(|m| m.into_iter().enumerate().collect::<Vec<_>>())
                .min_by(|a, b| map_cost(a, &cost).total_cmp(&map_cost(b, &cost)))
                .unwrap_or_default()
        } else {
            injections(nv, nr)
                .into_iter()
                .map(|m| m.into_iter().zip(0..nr).collect::<Vec<_>>())
                .min_by(|a, b| map_cost(a, &cost).total_cmp(&map_cost(b, &cost)))
                .unwrap_or_default()
        };
        for (cv, cr) in assignment {
            if cost[cv][cr] <= MAX_PAIR_RMS_PX {
                clusters[cr].push((v, cv));
            }
        }
    }

    clusters.retain(|c| c.len() >= 2);
    if clusters.len() < 2 {
        return Err(Error::DegenerateGeometry(
            "fewer than two targets were seen consistently in multiple views".into(),
        ));
    }

    // Triangulate cluster centers; clusters that fail to triangulate are
    // dropped before labeling.
    let mut tri: Vec<(Vec<(usize, usize)>, Point3, f64)> = Vec::new();
    for c in clusters {
        let obs: Vec<(&CameraView, Point2)> =
            c.iter().map(|&(vi, ci)| (&views[vi], candidates[vi][ci])).collect();
        if let Ok(x) = triangulate_point(&obs) {
            let rms = reprojection_rms(&obs, &x);
            tri.push((c, x, rms));
        }
    }
    let board_pts = board.centers();
    let n = board_pts.len();
    if tri.len() > n {
        // Keep the best-supported clusters: more views first, then lower
        // reprojection error.
        tri.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.2.total_cmp(&b.2)));
        tri.truncate(n);
    }
    let m = tri.len();
    if m < 2 {
        return Err(Error::DegenerateGeometry(
            "fewer than two targets survived triangulation".into(),
        ));
    }

    // Label clusters with board indices by distance-ratio consistency.
    let q: Vec<Point3> = tri.iter().map(|t| t.1).collect();
    let mut scored: Vec<(f64, Vec<usize>)> = injections(n, m)
        .into_iter()
        .map(|map| (ratio_spread(&q, &board_pts, &map), map))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (best_score, best_map) = (scored[0].0, scored[0].1.clone());
    let runner_up_score = scored.get(1).map(|s| s.0).unwrap_or(f64::INFINITY);
    if runner_up_score <= best_score * AMBIGUITY_FACTOR + 1e-9 {
        return Err(Error::AmbiguousMatch { best: best_score, runner_up: runner_up_score });
    }

    let mut assignments: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut centers_recon: Vec<Option<Point3>> = vec![None; n];
    for (j, &b) in best_map.iter().enumerate() {
        assignments[b] = tri[j].0.clone();
        centers_recon[b] = Some(q[j]);
    }
    Ok(TargetMatches { assignments, centers_recon, best_score, runner_up_score })
}

fn map_cost(pairs: &[(usize, usize)], cost: &[Vec<f64>]) -> f64 {
    pairs.iter().map(|&(cv, cr)| cost[cv][cr]).sum::<f64>() / pairs.len().max(1) as f64
}

/// Coefficient of variation of reconstructed-to-board distance ratios under
/// the labeling `map` (cluster j -> board index map[j]).
fn ratio_spread(q: &[Point3], board: &[Point3], map: &[usize]) -> f64 {
    let mut ratios = Vec::with_capacity(map.len() * (map.len() - 1) / 2);
    for j in 0..map.len() {
        for k in j + 1..map.len() {
            let dq = (q[j] - q[k]).norm();
            let dp = (board[map[j]] - board[map[k]]).norm();
            if dp <= 0.0 {
                return f64::INFINITY;
            }
            ratios.push(dq / dp);
        }
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    if mean <= 0.0 {
        return f64::INFINITY;
    }
    let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / ratios.len() as f64;
    var.sqrt() / mean
}
