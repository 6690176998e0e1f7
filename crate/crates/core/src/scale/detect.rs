//! Detection of bright circle targets in a grayscale image.
//!
//! Global Otsu threshold, 8-connected bright components, then a subpixel
//! boundary trace: for each boundary pixel the intensity profile along the
//! outward direction is sampled bilinearly and the 50% crossing located by
//! linear interpolation. An ellipse is fitted to the subpixel boundary and
//! gated on size, eccentricity and fit quality.

use crate::ellipse::{fit_ellipse, EllipseFit};
use crate::geom::Point2;
use crate::io::GrayImage;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetDetectConfig {
    /// Smallest accepted component area, px.
    pub min_area_px: usize,
    /// Largest accepted component area as a fraction of the image area.
    pub max_area_fraction: f64,
    /// Reject fits more elongated than this semi-axis ratio.
    pub max_axis_ratio: f64,
    /// Reject fits whose boundary RMS exceeds this, px.
    pub max_rms_px: f64,
    /// Minimum number of subpixel boundary points for a valid fit.
    pub min_boundary_points: usize,
}

impl Default for TargetDetectConfig {
    fn default() -> Self {
        TargetDetectConfig {
            min_area_px: 25,
            max_area_fraction: 0.25,
            max_axis_ratio: 4.0,
            max_rms_px: 0.5,
            min_boundary_points: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetCandidate {
    pub fit: EllipseFit,
    /// Pixel area of the thresholded component.
    pub area_px: usize,
}

impl TargetCandidate {
    pub fn center(&self) -> Point2 {
        self.fit.ellipse.center
    }
}

/// Otsu's threshold: maximizes between-class variance; ties resolve to the
/// lowest threshold. Foreground is `intensity > t`.
fn otsu_threshold(hist: &[u64; 256]) -> Option<u8> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return None;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &n)| i as f64 * n as f64).sum();
    let mut w0 = 0u64;
    let mut sum0 = 0.0;
    let mut best = (f64::NEG_INFINITY, 0u8);
    for t in 0..255usize {
        w0 += hist[t];
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, t as u8);
        }
    }
    if best.0.is_finite() {
        Some(best.1)
    } else {
        None // constant image
    }
}

struct Component {
    pixels: Vec<(u32, u32)>,
    touches_border: bool,
}

fn bright_components(img: &GrayImage, threshold: u8) -> Vec<Component> {
    let (w, h) = (img.width, img.height);
    let idx = |x: u32, y: u32| (y * w + x) as usize;
    let bright = |x: u32, y: u32| img.get(x, y) > threshold;
    let mut visited = vec![false; (w * h) as usize];
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if visited[idx(x, y)] || !bright(x, y) {
                continue;
            }
            let mut pixels = Vec::new();
            let mut touches_border = false;
            let mut stack = vec![(x, y)];
            visited[idx(x, y)] = true;
            while let Some((px, py)) = stack.pop() {
                pixels.push((px, py));
                if px == 0 || py == 0 || px == w - 1 || py == h - 1 {
                    touches_border = true;
                }
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let nx = px as i64 + dx;
                        let ny = py as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as u32, ny as u32);
                        if !visited[idx(nx, ny)] && bright(nx, ny) {
                            visited[idx(nx, ny)] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            out.push(Component { pixels, touches_border });
        }
    }
    out
}

/// Subpixel boundary of one component: 50% crossings of radial intensity
/// profiles through each boundary pixel.
fn subpixel_boundary(img: &GrayImage, comp: &Component, threshold: u8) -> Vec<Point2> {
    let n = comp.pixels.len() as f64;
    let cx = comp.pixels.iter().map(|&(x, _)| x as f64).sum::<f64>() / n;
    let cy = comp.pixels.iter().map(|&(_, y)| y as f64).sum::<f64>() / n;

    let bright = |x: i64, y: i64| {
        x >= 0
            && y >= 0
            && x < img.width as i64
            && y < img.height as i64
            && img.get(x as u32, y as u32) > threshold
    };

    const HALF_SPAN: f64 = 1.5;
    const STEP: f64 = 0.05;
    let mut pts = Vec::new();
    for &(px, py) in &comp.pixels {
        let (xi, yi) = (px as i64, py as i64);
        let on_edge = !bright(xi - 1, yi) || !bright(xi + 1, yi) || !bright(xi, yi - 1)
            || !bright(xi, yi + 1);
        if !on_edge {
            continue;
        }
        let dir = Point2::new(px as f64 - cx, py as f64 - cy);
        let norm = dir.coords.norm();
        if norm < 1e-9 {
            continue;
        }
        let dir = dir.coords / norm;

        let steps = (2.0 * HALF_SPAN / STEP) as usize;
        let profile: Vec<f64> = (0..=steps)
            .map(|i| {
                let t = -HALF_SPAN + i as f64 * STEP;
                img.sample(px as f64 + t * dir.x, py as f64 + t * dir.y)
            })
            .collect();
        let lo = profile.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 8.0 {
            continue; // too flat to localize an edge
        }
        let level = 0.5 * (lo + hi);

        // Crossing nearest the nominal boundary pixel.
        let mut best: Option<(f64, f64)> = None; // (|t|, t_cross)
        for i in 0..steps {
            let (a, b) = (profile[i] - level, profile[i + 1] - level);
            if a == 0.0 || a * b < 0.0 {
                let ta = -HALF_SPAN + i as f64 * STEP;
                let frac = if (b - a).abs() > 1e-12 { a / (a - b) } else { 0.0 };
                let t = ta + frac * STEP;
                if best.map_or(true, |(d, _)| t.abs() < d) {
                    best = Some((t.abs(), t));
                }
            }
        }
        if let Some((_, t)) = best {
            pts.push(Point2::new(px as f64 + t * dir.x, py as f64 + t * dir.y));
        }
    }
    pts
}

/// Find bright elliptical targets. Results are sorted by center, top to
/// bottom then left to right.
pub fn detect_target_ellipses(
    img: &GrayImage,
    cfg: &TargetDetectConfig,
) -> Result<Vec<TargetCandidate>> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::InvalidInput("empty image".into()));
    }
    let mut hist = [0u64; 256];
    for &p in &img.pixels {
        hist[p as usize] += 1;
    }
    let threshold = otsu_threshold(&hist).ok_or(Error::NoTargetsFound)?;

    let max_area = (cfg.max_area_fraction * img.width as f64 * img.height as f64) as usize;
    let mut candidates = Vec::new();
    for comp in bright_components(img, threshold) {
        if comp.touches_border
            || comp.pixels.len() < cfg.min_area_px
            || comp.pixels.len() > max_area
        {
            continue;
        }
        let boundary = subpixel_boundary(img, &comp, threshold);
        if boundary.len() < cfg.min_boundary_points.max(5) {
            continue;
        }
        let Ok(fit) = fit_ellipse(&boundary) else { continue };
        if fit.ellipse.axis_ratio() > cfg.max_axis_ratio || fit.rms > cfg.max_rms_px {
            continue;
        }
        candidates.push(TargetCandidate { fit, area_px: comp.pixels.len() });
    }
    if candidates.is_empty() {
        return Err(Error::NoTargetsFound);
    }
    candidates.sort_by(|a, b| {
        let ca = a.center();
        let cb = b.center();
        ca.y.total_cmp(&cb.y).then(ca.x.total_cmp(&cb.x))
    });
    Ok(candidates)
}
