//! A compact 3D kd-tree for nearest-neighbor queries on point clouds.

use crate::geom::Point3;

/// Static kd-tree over a point set. Indices returned by queries refer to the
/// original input order.
pub struct KdTree {
    points: Vec<Point3>,
    /// Point indices arranged in kd order; nodes are implicit (median split).
    order: Vec<u32>,
}

impl KdTree {
    pub fn build(points: &[Point3]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let n = order.len();
        build_recursive(points, &mut order, 0, n, 0);
        Self { points: points.to_vec(), order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest neighbor of `query`.
    pub fn nearest(&self, query: &Point3) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(query, 0, self.order.len(), 0, &mut best);
        Some(best)
    }

    fn search(&self, query: &Point3, lo: usize, hi: usize, axis: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let p = &self.points[idx];
        let d2 = (query - p).norm_squared();
        if d2 < best.1 {
            *best = (idx, d2);
        }
        let delta = query[axis] - p[axis];
        let next_axis = (axis + 1) % 3;
        let (near, far) = if delta < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(query, near.0, near.1, next_axis, best);
        if delta * delta < best.1 {
            self.search(query, far.0, far.1, next_axis, best);
        }
    }
}

fn build_recursive(points: &[Point3], order: &mut [u32], lo: usize, hi: usize, axis: usize) {
    if hi - lo <= 1 {
        return;
    }
    let mid = lo + (hi - lo) / 2;
    order[lo..hi].select_nth_unstable_by((hi - lo) / 2, |&a, &b| {
        points[a as usize][axis].total_cmp(&points[b as usize][axis])
    });
    let next = (axis + 1) % 3;
    build_recursive(points, order, lo, mid, next);
    build_recursive(points, order, mid + 1, hi, next);
}
