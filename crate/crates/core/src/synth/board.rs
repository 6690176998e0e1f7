//! Rendering of circle target boards into synthetic camera images.
//!
//! Each circle is projected exactly: the interior test evaluates the true
//! image conic of the circle, through the lens distortion when present, and
//! pixel coverage is resolved by 4x4 supersampling. The raster is therefore
//! a faithful (antialiased) image of the analytic geometry rather than a
//! polygon approximation.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::ellipse::fit::conic_to_ellipse;
use crate::geom::{fit_plane, Point2, UnitVec3};
use crate::io::GrayImage;
use crate::scale::{circle_image_conic, conic_center, CameraView, TargetBoard};
use crate::{Error, Result};

use super::derive_seed;

const SUPERSAMPLE: u32 = 4;

#[derive(Debug, Clone)]
pub struct RenderedBoard {
    pub image: GrayImage,
    /// Exact projections of the circle centers, distorted pixels, in board
    /// order. These are *not* the centers of the rendered blobs; the blob
    /// centers carry the perspective eccentricity bias.
    pub centers_px: Vec<Point2>,
}

fn board_normal(board: &TargetBoard) -> Result<UnitVec3> {
    let centers = board.centers();
    let fit = fit_plane(&centers)?;
    let span = centers
        .iter()
        .flat_map(|a| centers.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max);
    if fit.rms > 1e-9 * span.max(1.0) {
        return Err(Error::InvalidInput(
            "board circle centers are not coplanar".into(),
        ));
    }
    Ok(fit.plane.normal)
}

/// Render the board into a `width` x `height` image: white circles on a
/// black background. Every circle must be fully inside the image.
pub fn render_board(
    board: &TargetBoard,
    view: &CameraView,
    width: u32,
    height: u32,
) -> Result<RenderedBoard> {
    board.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput("image dimensions must be positive".into()));
    }
    let normal = board_normal(board)?;
    let mut image = GrayImage::new(width, height);
    let mut centers_px = Vec::with_capacity(board.centers_m.len());

    for (i, center) in board.centers().iter().enumerate() {
        let conic = circle_image_conic(view, *center, board.circle_radius_m, &normal)
            .ok_or_else(|| Error::OutOfFrustum(format!("circle {i} is behind the camera")))?;
        // The conic is an ellipse only while the whole circle is in front
        // of the principal plane.
        let ellipse = conic_to_ellipse(
            conic[(0, 0)],
            2.0 * conic[(0, 1)],
            conic[(1, 1)],
            2.0 * conic[(0, 2)],
            2.0 * conic[(1, 2)],
            conic[(2, 2)],
        )
        .map_err(|_| Error::OutOfFrustum(format!("circle {i} crosses the principal plane")))?;

        // Distorted-space bounding box from a dense boundary sampling.
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in 0..256 {
            let t = s as f64 / 256.0 * std::f64::consts::TAU;
            let p = view.intrinsics.distort_pixel(ellipse.point_at(t));
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        if lo.x < 0.0 || lo.y < 0.0 || hi.x > width as f64 - 1.0 || hi.y > height as f64 - 1.0 {
            return Err(Error::OutOfFrustum(format!(
                "circle {i} extends outside the {width}x{height} image"
            )));
        }

        // Interior sign of the conic quadratic form.
        let cc = conic_center(&conic)
            .ok_or_else(|| Error::OutOfFrustum(format!("circle {i} projects degenerately")))?;
        let eval = |p: Point2| {
            let x = nalgebra::Vector3::new(p.x, p.y, 1.0);
            (x.transpose() * conic * x)[(0, 0)]
        };
        let interior_sign = eval(cc).signum();

        let x0 = (lo.x - 1.0).floor().max(0.0) as u32;
        let y0 = (lo.y - 1.0).floor().max(0.0) as u32;
        let x1 = (hi.x + 1.0).ceil().min(width as f64 - 1.0) as u32;
        let y1 = (hi.y + 1.0).ceil().min(height as f64 - 1.0) as u32;
        let n_sub = SUPERSAMPLE * SUPERSAMPLE;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let mut hit = 0u32;
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let fx = x as f64 - 0.5 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                        let fy = y as f64 - 0.5 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                        let undist = view.intrinsics.undistort_pixel(Point2::new(fx, fy));
                        if eval(undist).signum() == interior_sign {
                            hit += 1;
                        }
                    }
                }
                if hit > 0 {
                    let v = ((hit * 255 + n_sub / 2) / n_sub) as u8;
                    let old = image.get(x, y);
                    image.set(x, y, old.max(v));
                }
            }
        }

        centers_px.push(view.project(center).ok_or_else(|| {
            Error::OutOfFrustum(format!("circle {i} center is behind the camera"))
        })?);
    }

    Ok(RenderedBoard { image, centers_px })
}

/// What an ideal ellipse detector would report for each view: the centers
/// of the projected circle conics (which carry the eccentricity bias),
/// optionally perturbed by Gaussian noise.
///
/// Returns per-view candidate lists in board order, distorted pixels. For
/// distorted cameras the conic center is mapped through the distortion,
/// which is accurate to well under a hundredth of a pixel for mild radial
/// coefficients.
pub fn analytic_board_observations(
    board: &TargetBoard,
    views: &[CameraView],
    noise_sigma_px: f64,
    seed: u64,
) -> Result<Vec<Vec<Point2>>> {
    board.validate()?;
    if !(noise_sigma_px.is_finite() && noise_sigma_px >= 0.0) {
        return Err(Error::InvalidInput("noise sigma must be non-negative".into()));
    }
    let normal = board_normal(board)?;
    let noise = Normal::new(0.0, noise_sigma_px.max(f64::MIN_POSITIVE))
        .expect("valid normal distribution");
    views
        .iter()
        .enumerate()
        .map(|(vi, view)| {
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, vi as u64));
            board
                .centers()
                .iter()
                .enumerate()
                .map(|(i, center)| {
                    let conic = circle_image_conic(view, *center, board.circle_radius_m, &normal)
                        .ok_or_else(|| {
                            Error::OutOfFrustum(format!("circle {i} is behind view {}", view.view_id))
                        })?;
                    let cc = conic_center(&conic).ok_or_else(|| {
                        Error::OutOfFrustum(format!(
                            "circle {i} projects degenerately in view {}",
                            view.view_id
                        ))
                    })?;
                    let mut p = view.intrinsics.distort_pixel(cc);
                    if noise_sigma_px > 0.0 {
                        p.x += noise.sample(&mut rng);
                        p.y += noise.sample(&mut rng);
                    }
                    Ok(p)
                })
                .collect()
        })
        .collect()
}
