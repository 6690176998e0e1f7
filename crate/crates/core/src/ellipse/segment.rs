//! Grid-based connected components for planar point sets.

use std::collections::HashMap;

use crate::geom::Point2;
use crate::{Error, Result};

/// One connected cluster of input points, by index into the input slice.
/// Indices are sorted ascending; segments are ordered by their smallest
/// member index, so the output is deterministic.
#[derive(Debug, Clone)]
pub struct Segment2D {
    pub indices: Vec<usize>,
    pub bbox_min: Point2,
    pub bbox_max: Point2,
}

impl Segment2D {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn points<'a>(&'a self, all: &'a [Point2]) -> impl Iterator<Item = &'a Point2> + 'a {
        self.indices.iter().map(move |&i| &all[i])
    }
}

/// Partition points into clusters of grid cells connected through their
/// 8-neighborhoods. Every input point lands in exactly one segment; no size
/// filtering happens here.
pub fn connected_components_2d(points: &[Point2], cell_size: f64) -> Result<Vec<Segment2D>> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::InvalidInput(format!("cell size must be positive, got {cell_size}")));
    }
    let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite point at index {i}")));
        }
        let key = ((p.x / cell_size).floor() as i64, (p.y / cell_size).floor() as i64);
        cells.entry(key).or_default().push(i);
    }

    let mut visited: HashMap<(i64, i64), bool> = HashMap::new();
    let mut segments = Vec::new();
    // Iterate seeds in point order so segment order does not depend on hash
    // iteration order.
    for p in points {
        let seed = ((p.x / cell_size).floor() as i64, (p.y / cell_size).floor() as i64);
        if *visited.get(&seed).unwrap_or(&false) {
            continue;
        }
        let mut stack = vec![seed];
        visited.insert(seed, true);
        let mut indices = Vec::new();
        while let Some(cell) = stack.pop() {
            indices.extend_from_slice(&cells[&cell]);
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nb = (cell.0 + dx, cell.1 + dy);
                    if cells.contains_key(&nb) && !visited.get(&nb).unwrap_or(&false) {
                        visited.insert(nb, true);
                        stack.push(nb);
                    }
                }
            }
        }
        indices.sort_unstable();
        let mut bbox_min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut bbox_max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &idx in &indices {
            bbox_min.x = bbox_min.x.min(points[idx].x);
            bbox_min.y = bbox_min.y.min(points[idx].y);
            bbox_max.x = bbox_max.x.max(points[idx].x);
            bbox_max.y = bbox_max.y.max(points[idx].y);
        }
        segments.push(Segment2D { indices, bbox_min, bbox_max });
    }
    Ok(segments)
}
