//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by geometry, fitting, and pipeline operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Input geometry is degenerate for the requested operation
    /// (collinear points, rank-deficient systems, zero spread).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Fewer input points than the operation requires.
    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    /// The constrained conic fit did not produce an ellipse.
    #[error("fitted conic is not an ellipse")]
    NotAnEllipse,

    /// No cloud point lies within the slab around the seed plane.
    #[error("empty slab: no points within {half_width} m of the seed plane")]
    EmptySlab { half_width: f64 },

    /// A candidate cylinder has too few supporting points.
    #[error("insufficient support: {got} points, minimum {needed}")]
    InsufficientSupport { needed: usize, got: usize },

    /// Iterative refinement failed to converge.
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    /// Scale application requested on an already metric cloud.
    #[error("point cloud is already metric")]
    AlreadyMetric,

    /// Ground-truth length is zero; percent error is undefined.
    #[error("ground-truth length is zero")]
    ZeroTruth,

    /// Target matching needs at least two views with enough candidates.
    #[error("insufficient views: need at least {needed}, got {got}")]
    InsufficientViews { needed: usize, got: usize },

    /// Two target-labeling hypotheses score too close to call.
    #[error("ambiguous target match: best {best:.6}, runner-up {runner_up:.6}")]
    AmbiguousMatch { best: f64, runner_up: f64 },

    /// Triangulated point falls behind a camera.
    #[error("triangulated point is behind camera of view {view_id}")]
    BehindCamera { view_id: u32 },

    /// Ray geometry too weak for triangulation.
    #[error("ill-conditioned triangulation: max ray parallax {max_parallax_deg:.4} deg")]
    IllConditioned { max_parallax_deg: f64 },

    /// No circular targets found in a raster.
    #[error("no targets found in raster")]
    NoTargetsFound,

    /// Object lies outside the camera frustum.
    #[error("target outside camera frustum: {0}")]
    OutOfFrustum(String),

    /// Overlap asked for an unregistered frame.
    #[error("frame {frame_id} is not registered")]
    Unregistered { frame_id: u32 },

    /// The requested overlap band cannot be reached on the source video grid.
    #[error("overlap band unreachable: {0}")]
    BandUnreachable(String),

    /// A reconstruction backend call failed.
    #[error("backend failure at iteration {iteration}: {message}")]
    BackendFailure { iteration: usize, message: String },

    /// Malformed input file.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    /// Invalid configuration or argument.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
