//! 2D machinery behind cylinder and target detection: grid-based connected
//! components, robust ellipse fitting, and candidate gating.

pub(crate) mod fit;
mod segment;

pub use fit::{fit_ellipse, EllipseFit};
pub use segment::{connected_components_2d, Segment2D};

use crate::geom::{Point2, Vec2};
use crate::{Error, Result};

/// An ellipse in the plane: center, semi-axes `a >= b`, and major-axis
/// orientation `theta` in `[0, pi)`. Circles report `theta = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse2D {
    pub center: Point2,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub theta: f64,
}

impl Ellipse2D {
    /// Tolerance below which an ellipse is treated as a circle and its
    /// orientation canonicalized to zero.
    const CIRCLE_TOL: f64 = 1e-12;

    pub fn new(center: Point2, semi_major: f64, semi_minor: f64, theta: f64) -> Result<Self> {
        if !(semi_minor > 0.0 && semi_major >= semi_minor) || !semi_major.is_finite() {
            return Err(Error::InvalidInput(format!(
                "invalid semi-axes a={semi_major}, b={semi_minor}"
            )));
        }
        let theta = if (semi_major - semi_minor) / semi_major < Self::CIRCLE_TOL {
            0.0
        } else {
            theta.rem_euclid(std::f64::consts::PI)
        };
        Ok(Self { center, semi_major, semi_minor, theta })
    }

    /// Ratio of semi-major to semi-minor axis (1 for a circle).
    pub fn axis_ratio(&self) -> f64 {
        self.semi_major / self.semi_minor
    }

    /// Unit direction of the major axis.
    pub fn major_axis_dir(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    /// Unit direction of the minor axis.
    pub fn minor_axis_dir(&self) -> Vec2 {
        Vec2::new(-self.theta.sin(), self.theta.cos())
    }

    /// Point at parametric angle `t`.
    pub fn point_at(&self, t: f64) -> Point2 {
        let local = Vec2::new(self.semi_major * t.cos(), self.semi_minor * t.sin());
        self.center + self.rotate(local)
    }

    /// `n` points sampled over the parametric arc `[t0, t1]`.
    pub fn sample_arc(&self, t0: f64, t1: f64, n: usize) -> Vec<Point2> {
        (0..n)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / (n.max(2) - 1) as f64;
                self.point_at(t)
            })
            .collect()
    }

    /// Signed orthogonal distance from `p` to the ellipse boundary
    /// (positive outside) together with the parametric angle of the closest
    /// boundary point.
    pub fn signed_distance(&self, p: &Point2) -> (f64, f64) {
        let local = self.unrotate(p - self.center);
        let (u, v) = (local.x.abs(), local.y.abs());
        let (cx, cy) = closest_point_first_quadrant(self.semi_major, self.semi_minor, u, v);
        let dist = ((u - cx).powi(2) + (v - cy).powi(2)).sqrt();
        let inside = (u / self.semi_major).powi(2) + (v / self.semi_minor).powi(2) < 1.0;
        // Unfold the quadrant symmetry used for the closest-point solve.
        let t = (cy / self.semi_minor).atan2(cx / self.semi_major);
        let t = match (local.x >= 0.0, local.y >= 0.0) {
            (true, true) => t,
            (false, true) => std::f64::consts::PI - t,
            (false, false) => std::f64::consts::PI + t,
            (true, false) => -t,
        };
        (if inside { -dist } else { dist }, t)
    }

    fn rotate(&self, v: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    fn unrotate(&self, v: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(c * v.x + s * v.y, -s * v.x + c * v.y)
    }
}

/// Closest point on the axis-aligned ellipse `(x/a)^2 + (y/b)^2 = 1` to a
/// query point in the closed first quadrant. Robust bisection-safeguarded
/// Newton on the standard rational root function.
fn closest_point_first_quadrant(a: f64, b: f64, u: f64, v: f64) -> (f64, f64) {
    debug_assert!(a >= b && b > 0.0 && u >= 0.0 && v >= 0.0);
    if v <= f64::EPSILON * b {
        // On the major axis: the closest point leaves the axis inside the
        // evolute cusp at x = (a^2 - b^2)/a.
        let xc = (a * a - b * b) / a;
        if u < xc {
            let x = a * a * u / (a * a - b * b);
            let y = b * (1.0 - (x / a).powi(2)).max(0.0).sqrt();
            return (x, y);
        }
        return (a, 0.0);
    }
    if u <= f64::EPSILON * a {
        return (0.0, b);
    }

    // F(t) = (a u / (t + a^2))^2 + (b v / (t + b^2))^2 - 1, strictly
    // decreasing on (-b^2, inf) with a single root; the closest point is
    // x = a^2 u / (t + a^2), y = b^2 v / (t + b^2).
    let (au, bv) = (a * u, b * v);
    let mut lo = -b * b + bv;
    let mut hi = -b * b + (au * au + bv * bv).sqrt();
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let p = au / (t + a * a);
        let q = bv / (t + b * b);
        let ft = p * p + q * q - 1.0;
        if ft.abs() < 1e-15 {
            break;
        }
        if ft > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let dft = -2.0 * (p * p / (t + a * a) + q * q / (t + b * b));
        let newton = t - ft / dft;
        t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-16 * (1.0 + hi.abs()) {
            break;
        }
    }
    (a * a * u / (t + a * a), b * b * v / (t + b * b))
}

/// Why a fitted ellipse candidate was rejected.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum EllipseRejection {
    /// Semi-minor axis outside the plausible pipe-radius window.
    RadiusOutOfRange { semi_minor: f64, min: f64, max: f64 },
    /// Too few points agree with the fitted boundary.
    LowSupport { inlier_ratio: f64, min: f64 },
    /// Axis ratio above the eccentricity cap (grazing or spurious shape).
    TooEccentric { axis_ratio: f64, max: f64 },
    /// Segment smaller than the minimum point count.
    TooFewPoints { count: usize, min: usize },
}

/// Gates applied to fitted ellipse candidates before cylinder recovery.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EllipseGateConfig {
    /// Lower bound on the semi-minor axis, meters (half the smallest planned
    /// class radius).
    pub min_radius_m: f64,
    /// Upper bound on the semi-minor axis, meters (twice the largest planned
    /// class radius).
    pub max_radius_m: f64,
    /// Minimum fraction of segment points within the inlier band of the fit.
    pub min_inlier_ratio: f64,
    /// Maximum allowed semi-major over semi-minor ratio.
    pub max_axis_ratio: f64,
    /// Minimum segment size considered at all.
    pub min_points: usize,
}

impl Default for EllipseGateConfig {
    fn default() -> Self {
        Self {
            min_radius_m: 0.004,
            max_radius_m: 0.30,
            min_inlier_ratio: 0.5,
            max_axis_ratio: 4.0,
            min_points: 30,
        }
    }
}

impl EllipseGateConfig {
    /// Derive the radius window from a planned class-radius range:
    /// `[r_min / 2, 2 r_max]`.
    pub fn for_class_radius_range(r_min: f64, r_max: f64) -> Self {
        Self { min_radius_m: r_min / 2.0, max_radius_m: 2.0 * r_max, ..Self::default() }
    }
}

/// Gate a fitted candidate. Returns `None` when accepted, otherwise the
/// first failing reason. Pure predicate; never errors.
pub fn validate_ellipse(
    fit: &EllipseFit,
    segment_len: usize,
    cfg: &EllipseGateConfig,
) -> Option<EllipseRejection> {
    if segment_len < cfg.min_points {
        return Some(EllipseRejection::TooFewPoints { count: segment_len, min: cfg.min_points });
    }
    let b = fit.ellipse.semi_minor;
    if b < cfg.min_radius_m || b > cfg.max_radius_m {
        return Some(EllipseRejection::RadiusOutOfRange {
            semi_minor: b,
            min: cfg.min_radius_m,
            max: cfg.max_radius_m,
        });
    }
    if fit.ellipse.axis_ratio() > cfg.max_axis_ratio {
        return Some(EllipseRejection::TooEccentric {
            axis_ratio: fit.ellipse.axis_ratio(),
            max: cfg.max_axis_ratio,
        });
    }
    if fit.inlier_ratio < cfg.min_inlier_ratio {
        return Some(EllipseRejection::LowSupport {
            inlier_ratio: fit.inlier_ratio,
            min: cfg.min_inlier_ratio,
        });
    }
    None
}
