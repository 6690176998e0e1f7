//! 2D convex hull (monotone chain) and enclosed area.

use super::Point2;
use crate::{Error, Result};

/// Convex hull of a 2D point set in counter-clockwise order, without
/// collinear boundary points. Degenerate inputs yield fewer than 3 vertices.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() < 3 {
        return pts;
    }

    let cross = |o: &Point2, a: &Point2, b: &Point2| -> f64 {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };

    let mut lower: Vec<Point2> = Vec::with_capacity(pts.len());
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::with_capacity(pts.len());
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    // Endpoints are shared between the chains.
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Area enclosed by the convex hull of `points` (shoelace on the hull).
///
/// Needs at least 3 points; collinear input is degenerate.
pub fn convex_hull_area(points: &[Point2]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: points.len() });
    }
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return Err(Error::DegenerateGeometry("all points are collinear".into()));
    }
    let mut twice_area = 0.0;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        twice_area += a.x * b.y - b.x * a.y;
    }
    Ok(twice_area.abs() / 2.0)
}
