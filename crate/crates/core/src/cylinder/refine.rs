//! Robust nonlinear refinement of cylinder parameters, plus the robust
//! circle fit used for axis disambiguation.

use nalgebra::{Matrix3, Matrix5, Vector3, Vector5};

use super::CylinderModel;
use crate::geom::{perpendicular_basis, Point2, Point3, UnitVec3};
use crate::{Error, Result};

const MAX_ITERS: usize = 100;
const STEP_TOL: f64 = 1e-8;
const HUBER_KNEE: f64 = 1.345;
const MAD_SCALE: f64 = 1.4826;

/// A circle fitted to 2D points with robust statistics.
#[derive(Debug, Clone, Copy)]
pub struct CircleFit {
    pub center: Point2,
    pub radius: f64,
    /// RMSE of radial residuals over the inlier set (within 3 sigma).
    pub inlier_rmse: f64,
}

/// Robust circle fit: algebraic linear fit, then Huber-reweighted
/// Gauss-Newton on radial residuals.
pub fn fit_circle_robust(points: &[Point2]) -> Result<CircleFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: points.len() });
    }
    // Linear fit of x^2 + y^2 + D x + E y + F = 0.
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for p in points {
        let row = Vector3::new(p.x, p.y, 1.0);
        let rhs = -(p.x * p.x + p.y * p.y);
        ata += row * row.transpose();
        atb += row * rhs;
    }
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::DegenerateGeometry("circle fit is rank-deficient".into()))?;
    let mut cx = -sol.x / 2.0;
    let mut cy = -sol.y / 2.0;
    let r2 = cx * cx + cy * cy - sol.z;
    if !(r2 > 0.0) {
        return Err(Error::DegenerateGeometry("circle fit has non-positive radius".into()));
    }
    let mut r = r2.sqrt();

    // Geometric polish with Huber weights.
    for _ in 0..30 {
        let resid: Vec<f64> =
            points.iter().map(|p| ((p.x - cx).hypot(p.y - cy)) - r).collect();
        let sigma = robust_sigma(&resid).max(1e-14 * r);
        let knee = HUBER_KNEE * sigma;
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for (p, &res) in points.iter().zip(&resid) {
            let d = (p.x - cx).hypot(p.y - cy);
            if d < 1e-12 {
                continue;
            }
            let w = if res.abs() <= knee { 1.0 } else { knee / res.abs() };
            let row = Vector3::new(-(p.x - cx) / d, -(p.y - cy) / d, -1.0);
            ata += row * row.transpose() * w;
            atb -= row * (w * res);
        }
        let Some(mut step) = ata.lu().solve(&atb) else { break };
        // On smeared point sets the Gauss-Newton step can overshoot toward a
        // non-positive radius; cap the shrink at half the current radius so
        // the iterate stays in the feasible region.
        if r + step.z < 0.5 * r {
            step *= 0.5 * r / -step.z;
        }
        cx += step.x;
        cy += step.y;
        r += step.z;
        if step.amax() < 1e-12 * (1.0 + r) {
            break;
        }
    }

    let resid: Vec<f64> = points.iter().map(|p| ((p.x - cx).hypot(p.y - cy)) - r).collect();
    let sigma = robust_sigma(&resid);
    let cut = (3.0 * sigma).max(1e-12 * r);
    let (mut sum, mut n) = (0.0, 0usize);
    for &res in &resid {
        if res.abs() <= cut {
            sum += res * res;
            n += 1;
        }
    }
    Ok(CircleFit {
        center: Point2::new(cx, cy),
        radius: r,
        inlier_rmse: if n > 0 { (sum / n as f64).sqrt() } else { f64::INFINITY },
    })
}

fn robust_sigma(residuals: &[f64]) -> f64 {
    let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    let mid = abs.len() / 2;
    abs.select_nth_unstable_by(mid, f64::total_cmp);
    MAD_SCALE * abs[mid]
}

/// Internal cylinder state during refinement: a point on the axis, the axis
/// direction, and the radius.
#[derive(Clone, Copy)]
struct State {
    c: Point3,
    axis: UnitVec3,
    r: f64,
}

fn residuals(points: &[Point3], idx: &[usize], s: &State) -> Vec<f64> {
    idx.iter()
        .map(|&i| {
            let w = points[i] - s.c;
            (w - s.axis.into_inner() * w.dot(&s.axis)).norm() - s.r
        })
        .collect()
}

fn huber_cost(resid: &[f64], sigma: f64) -> f64 {
    let knee = HUBER_KNEE * sigma;
    resid
        .iter()
        .map(|&v| {
            let a = v.abs();
            if a <= knee {
                0.5 * v * v
            } else {
                knee * (a - 0.5 * knee)
            }
        })
        .sum()
}

/// Refine a cylinder over five parameters (two axis-direction, two
/// axis-position perpendicular to the axis, radius) by minimizing
/// Huber-weighted radial residuals. Inliers are support points within three
/// robust sigma of the surface; RMSE is over that inlier set.
///
/// The support must spread along the axis at least one radius, otherwise
/// the problem is sphere-like and rejected as degenerate.
pub fn refine_cylinder(
    points: &[Point3],
    support: &[usize],
    axis: &UnitVec3,
    radius: f64,
    axis_point: &Point3,
) -> Result<CylinderModel> {
    if support.len() < 50 {
        return Err(Error::InsufficientSupport { needed: 50, got: support.len() });
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("initial radius must be positive, got {radius}")));
    }
    let (mut t_min, mut t_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in support {
        let t = (points[i] - axis_point).dot(axis);
        t_min = t_min.min(t);
        t_max = t_max.max(t);
    }
    if t_max - t_min < radius {
        return Err(Error::DegenerateGeometry(format!(
            "axial extent {:.4} below radius {:.4}: sphere-like support",
            t_max - t_min,
            radius
        )));
    }

    let mut state = State { c: *axis_point, axis: *axis, r: radius };
    let mut lambda = 1e-6;
    let r0 = residuals(points, support, &state);
    let mut cost = huber_cost(&r0, robust_sigma(&r0).max(1e-14 * radius));
    let mut converged = false;

    for _ in 0..MAX_ITERS {
        let resid = residuals(points, support, &state);
        let sigma = robust_sigma(&resid).max(1e-14 * state.r);
        let knee = HUBER_KNEE * sigma;
        let (u, v) = perpendicular_basis(&state.axis);

        let mut jtj = Matrix5::zeros();
        let mut rhs = Vector5::zeros();
        for (k, &i) in support.iter().enumerate() {
            let w = points[i] - state.c;
            let axial = w.dot(&state.axis);
            let perp = w - state.axis.into_inner() * axial;
            let rho = perp.norm();
            if rho < 1e-12 {
                continue;
            }
            let q = perp / rho;
            // Rows: d(residual)/d(alpha_u, alpha_v, beta_u, beta_v, R).
            let row = Vector5::new(
                -axial * q.dot(&u),
                -axial * q.dot(&v),
                -q.dot(&u),
                -q.dot(&v),
                -1.0,
            );
            let res = resid[k];
            let wt = if res.abs() <= knee { 1.0 } else { knee / res.abs() };
            jtj += row * row.transpose() * wt;
            rhs -= row * (wt * res);
        }

        let mut accepted = false;
        for _ in 0..8 {
            let mut damped = jtj;
            for k in 0..5 {
                damped[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = damped.lu().solve(&rhs) else {
                lambda *= 10.0;
                continue;
            };
            let new_axis = UnitVec3::new_normalize(
                state.axis.into_inner() + u.into_inner() * step[0] + v.into_inner() * step[1],
            );
            let new_c = state.c + u.into_inner() * step[2] + v.into_inner() * step[3];
            let new_r = state.r + step[4];
            if !(new_r > 0.0) || !new_r.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let candidate = State { c: new_c, axis: new_axis, r: new_r };
            let cand_resid = residuals(points, support, &candidate);
            let cand_cost =
                huber_cost(&cand_resid, robust_sigma(&cand_resid).max(1e-14 * new_r));
            if cand_cost <= cost {
                state = candidate;
                cost = cand_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if step.amax() < STEP_TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No downhill step found at any damping: stationary.
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: MAX_ITERS });
    }

    let resid = residuals(points, support, &state);
    let sigma = robust_sigma(&resid);
    let cut = (3.0 * sigma).max(1e-12 * state.r);
    let mut inliers = Vec::with_capacity(support.len());
    let mut sum = 0.0;
    for (k, &i) in support.iter().enumerate() {
        if resid[k].abs() <= cut {
            inliers.push(i);
            sum += resid[k] * resid[k];
        }
    }
    if inliers.is_empty() {
        return Err(Error::DegenerateGeometry("no inliers after refinement".into()));
    }
    let rmse = (sum / inliers.len() as f64).sqrt();
    // Anchor the reported axis point next to the support, not at infinity.
    let c = closest_on_axis(&state, axis_point);
    Ok(CylinderModel {
        axis: state.axis,
        axis_point: c,
        radius: state.r,
        length: 0.0,
        inliers,
        radial_rmse: rmse,
    })
}

fn closest_on_axis(s: &State, p: &Point3) -> Point3 {
    let t = (p - s.c).dot(&s.axis);
    s.c + s.axis.into_inner() * t
}
