//! Digital documentation of mechanical pipes from photogrammetric
//! reconstructions.
//!
//! The crate covers the four stages of the pipeline:
//!
//! 1. **Frame planning** ([`frames`]): compute per-image network overlap from
//!    a sparse reconstruction and plan which video frames to add or remove
//!    until every image sits inside a target overlap band.
//! 2. **Metric scale** ([`scale`]): detect circular targets of a known board
//!    in grayscale rasters, match them across views, correct the projective
//!    center eccentricity, triangulate, and recover the scale factor that
//!    turns an arbitrary-scale reconstruction into meters.
//! 3. **Cylinder detection** ([`cylinder`]): slice the point cloud with a seed
//!    plane, detect ellipses in the projected slab, recover cylinder
//!    candidates from the plane/cylinder intersection geometry, and refine
//!    them robustly.
//! 4. **Classification and reporting** ([`progress`]): classify detected
//!    cylinders against planned bill-of-quantity radii with seeded k-means
//!    and emit progress/quality reports.
//!
//! [`synth`] generates ground-truthed synthetic scenes, target-board rasters,
//! and a simulated reconstruction backend; it backs the test oracles and the
//! experiment harness. [`io`] holds the interchange formats (PLY clouds, PGM
//! rasters, sparse-model bundles, board and class-table definitions).

pub mod cylinder;
pub mod ellipse;
pub mod error;
pub mod frames;
pub mod geom;
pub mod io;
pub mod progress;
pub mod scale;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
