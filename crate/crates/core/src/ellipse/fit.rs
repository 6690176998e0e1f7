//! Ellipse fitting: direct conic least squares constrained to ellipses,
//! then geometric-distance refinement with Huber reweighting.

use nalgebra::{Matrix3, MatrixXx5, Vector3, Vector5};

use super::Ellipse2D;
use crate::geom::Point2;
use crate::{Error, Result};

/// A fitted ellipse with quality statistics.
///
/// `rms` is over orthogonal boundary distances of all input points; `sigma`
/// is the robust scale estimate of those residuals; `inlier_ratio` counts
/// points within three sigma of the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseFit {
    pub ellipse: Ellipse2D,
    pub rms: f64,
    pub sigma: f64,
    pub inlier_ratio: f64,
}

const MAX_ITERS: usize = 100;
/// Huber transition point in units of the robust scale.
const HUBER_KNEE: f64 = 1.345;
/// MAD-to-sigma factor for normally distributed residuals.
const MAD_SCALE: f64 = 1.4826;

/// Fit an ellipse to at least five points.
///
/// The algebraic stage is the stable direct ellipse-specific least-squares
/// fit on centered, scaled coordinates; the geometric stage minimizes
/// Huber-weighted orthogonal distances over center, semi-axes, and
/// orientation. Refinement only ever accepts steps that lower the robust
/// cost, so exact boundary samples keep their (near-zero) residuals.
pub fn fit_ellipse(points: &[Point2]) -> Result<EllipseFit> {
    if points.len() < 5 {
        return Err(Error::InsufficientPoints { needed: 5, got: points.len() });
    }
    for p in points {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::InvalidInput("non-finite input point".into()));
        }
    }

    let initial = direct_fit(points)?;
    let refined = refine_geometric(points, initial)?;
    Ok(statistics(points, refined))
}

/// Stable direct least-squares ellipse fit (reduced 3x3 eigenproblem with
/// the ellipse constraint built in), in normalized coordinates.
fn direct_fit(points: &[Point2]) -> Result<Ellipse2D> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let spread = points
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if spread < 1e-300 {
        return Err(Error::DegenerateGeometry("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / spread;

    // Scatter blocks of the design matrices [x^2 xy y^2 | x y 1].
    let mut s1 = Matrix3::zeros();
    let mut s2 = Matrix3::zeros();
    let mut s3 = Matrix3::zeros();
    for p in points {
        let x = (p.x - cx) * s;
        let y = (p.y - cy) * s;
        let d1 = Vector3::new(x * x, x * y, y * y);
        let d2 = Vector3::new(x, y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }
    let s3_inv = s3.try_inverse().ok_or_else(|| {
        Error::DegenerateGeometry("rank-deficient linear scatter (collinear points?)".into())
    })?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // Premultiply by the inverse of the constraint matrix.
    let m = Matrix3::new(
        m[(2, 0)] / 2.0,
        m[(2, 1)] / 2.0,
        m[(2, 2)] / 2.0,
        -m[(1, 0)],
        -m[(1, 1)],
        -m[(1, 2)],
        m[(0, 0)] / 2.0,
        m[(0, 1)] / 2.0,
        m[(0, 2)] / 2.0,
    );

    // Exactly one eigenvector satisfies the ellipse constraint 4ac - b^2 > 0.
    let mut best: Option<Vector3<f64>> = None;
    for lambda in real_eigenvalues(&m) {
        let v = null_vector(&(m - Matrix3::identity() * lambda));
        let constraint = 4.0 * v.x * v.z - v.y * v.y;
        if constraint > 0.0 && best.is_none() {
            best = Some(v);
        }
    }
    let a1 = best.ok_or(Error::NotAnEllipse)?;
    let a2 = t * a1;

    // Conic in normalized coordinates; undo the normalization.
    let (an, bn, cn, dn, en, fn_) = (a1.x, a1.y, a1.z, a2.x, a2.y, a2.z);
    let a = an * s * s;
    let b = bn * s * s;
    let c = cn * s * s;
    let d = dn * s - 2.0 * a * cx - b * cy;
    let e = en * s - 2.0 * c * cy - b * cx;
    let f = fn_ - dn * s * cx - en * s * cy + an * s * s * cx * cx
        + bn * s * s * cx * cy
        + cn * s * s * cy * cy;
    conic_to_ellipse(a, b, c, d, e, f)
}

/// Real eigenvalues of a 3x3 matrix via its characteristic cubic.
fn real_eigenvalues(m: &Matrix3<f64>) -> Vec<f64> {
    let tr = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
        + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    let det = m.determinant();
    // lambda^3 - tr lambda^2 + minors lambda - det = 0
    cubic_real_roots(-tr, minors, -det)
}

/// Real roots of x^3 + p2 x^2 + p1 x + p0.
fn cubic_real_roots(p2: f64, p1: f64, p0: f64) -> Vec<f64> {
    // Depressed form t^3 + pt + q with x = t - p2/3.
    let shift = p2 / 3.0;
    let p = p1 - p2 * p2 / 3.0;
    let q = 2.0 * p2.powi(3) / 27.0 - p2 * p1 / 3.0 + p0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = Vec::with_capacity(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        roots.push(u + v - shift);
    } else if p.abs() < 1e-300 {
        roots.push((-q).cbrt() - shift);
    } else {
        // Three real roots: trigonometric method.
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        for k in 0..3 {
            roots.push(r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift);
        }
    }
    // One Newton polish per root.
    for x in &mut roots {
        for _ in 0..2 {
            let fx = ((*x + p2) * *x + p1) * *x + p0;
            let dfx = (3.0 * *x + 2.0 * p2) * *x + p1;
            if dfx.abs() > 1e-300 {
                *x -= fx / dfx;
            }
        }
    }
    roots
}

/// Unit vector spanning the (numerical) null space of a near-singular 3x3
/// matrix, via the smallest right singular vector.
fn null_vector(m: &Matrix3<f64>) -> Vector3<f64> {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let row = vt.row(2);
    Vector3::new(row[0], row[1], row[2]).normalize()
}

/// Geometric parameters from a general conic
/// `a x^2 + b xy + c y^2 + d x + e y + f = 0`.
pub(crate) fn conic_to_ellipse(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Result<Ellipse2D> {
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        return Err(Error::NotAnEllipse);
    }
    let cx = (2.0 * c * d - b * e) / disc;
    let cy = (2.0 * a * e - b * d) / disc;
    // Constant term after recentering.
    let f0 = f + 0.5 * (d * cx + e * cy);
    // Eigen-decompose the quadratic part; axes are 1/sqrt(lambda / -f0).
    let scale = -f0;
    // theta0 is one of the two eigendirections of the quadratic part; its
    // eigenvalue is the form evaluated along it, the other follows from the
    // trace. Semi-axis along an eigendirection is sqrt(scale / eigenvalue).
    let theta0 = 0.5 * b.atan2(a - c);
    let (s, co) = theta0.sin_cos();
    let l_along = a * co * co + b * co * s + c * s * s;
    let l_perp = a + c - l_along;
    if !(l_along * scale > 0.0 && l_perp * scale > 0.0) {
        return Err(Error::NotAnEllipse);
    }
    let semi_along = (scale / l_along).sqrt();
    let semi_perp = (scale / l_perp).sqrt();
    if semi_along >= semi_perp {
        Ellipse2D::new(Point2::new(cx, cy), semi_along, semi_perp, theta0)
    } else {
        Ellipse2D::new(
            Point2::new(cx, cy),
            semi_perp,
            semi_along,
            theta0 + std::f64::consts::FRAC_PI_2,
        )
    }
}

/// Residuals, robust scale, and Huber weights for the current estimate.
fn residuals(points: &[Point2], e: &Ellipse2D) -> (Vec<f64>, Vec<f64>, f64) {
    let r: Vec<f64> = points.iter().map(|p| e.signed_distance(p).0).collect();
    let mut abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    let mid = abs.len() / 2;
    abs.select_nth_unstable_by(mid, f64::total_cmp);
    let mad = abs[mid];
    // Floor keeps exact data from collapsing the scale to zero.
    let sigma = (MAD_SCALE * mad).max(1e-14 * (e.semi_major + e.semi_minor));
    let knee = HUBER_KNEE * sigma;
    let w: Vec<f64> =
        r.iter().map(|v| if v.abs() <= knee { 1.0 } else { knee / v.abs() }).collect();
    (r, w, sigma)
}

fn huber_cost(r: &[f64], sigma: f64) -> f64 {
    let knee = HUBER_KNEE * sigma;
    r.iter()
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

/// Levenberg-style refinement of (cx, cy, a, b, theta) under Huber-weighted
/// orthogonal distances.
fn refine_geometric(points: &[Point2], init: Ellipse2D) -> Result<Ellipse2D> {
    let mut est = init;
    let mut lambda = 1e-6;
    let (r0, _, sigma0) = residuals(points, &est);
    let mut cost = huber_cost(&r0, sigma0);

    for _ in 0..MAX_ITERS {
        let (r, w, _) = residuals(points, &est);
        let n = points.len();
        let mut jac = MatrixXx5::zeros(n);
        let mut rhs = Vector5::zeros();
        let (sin_t, cos_t) = est.theta.sin_cos();
        for (i, p) in points.iter().enumerate() {
            let (_, t) = est.signed_distance(p);
            let (st, ct) = t.sin_cos();
            // Boundary point in the ellipse frame and the outward normal
            // there (gradient direction of the implicit form).
            let bx = est.semi_major * ct;
            let by = est.semi_minor * st;
            let mut nx = bx / (est.semi_major * est.semi_major);
            let mut ny = by / (est.semi_minor * est.semi_minor);
            let nn = (nx * nx + ny * ny).sqrt();
            nx /= nn;
            ny /= nn;
            // World-frame normal.
            let nwx = cos_t * nx - sin_t * ny;
            let nwy = sin_t * nx + cos_t * ny;
            // d(residual)/d(param) = -n . d(boundary point)/d(param).
            let da = -(nwx * cos_t * ct + nwy * sin_t * ct);
            let db = -(nwx * (-sin_t) * st + nwy * cos_t * st);
            let dtheta = -(nwx * (-sin_t * bx - cos_t * by) + nwy * (cos_t * bx - sin_t * by));
            let row = [-nwx, -nwy, da, db, dtheta];
            let sw = w[i].sqrt();
            for (j, v) in row.iter().enumerate() {
                jac[(i, j)] = sw * v;
            }
            rhs -= Vector5::from_column_slice(&row) * (w[i] * r[i]);
        }
        let jtj = jac.transpose() * &jac;

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
            let mut a = est.semi_major + step[2];
            let mut b = est.semi_minor + step[3];
            let mut theta = est.theta + step[4];
            if b <= 0.0 || !b.is_finite() || !a.is_finite() {
                lambda *= 10.0;
                continue;
            }
            if a < b {
                std::mem::swap(&mut a, &mut b);
                theta += std::f64::consts::FRAC_PI_2;
            }
            let Ok(candidate) = Ellipse2D::new(
                Point2::new(est.center.x + step[0], est.center.y + step[1]),
                a,
                b,
                theta,
            ) else {
                lambda *= 10.0;
                continue;
            };
            let (rc, _, sc) = residuals(points, &candidate);
            let new_cost = huber_cost(&rc, sc);
            if new_cost <= cost {
                let step_size = step.amax();
                est = candidate;
                cost = new_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if step_size < 1e-12 * (1.0 + est.semi_major) {
                    return Ok(est);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(est)
}

fn statistics(points: &[Point2], e: Ellipse2D) -> EllipseFit {
    let (r, _, sigma) = residuals(points, &e);
    let rms = (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
    let cut = (3.0 * sigma).max(1e-9 * (e.semi_major + e.semi_minor));
    let inliers = r.iter().filter(|v| v.abs() <= cut).count();
    EllipseFit { ellipse: e, rms, sigma, inlier_ratio: inliers as f64 / r.len() as f64 }
}
