//! Interchange formats: PLY point clouds, PGM rasters, sparse-model
//! bundles, and ground-truth tables.

mod bundle;
mod pgm;
mod ply;
mod truth;

pub use bundle::{
    read_bundle, write_bundle, Bundle, BundleIntrinsics, BundlePoint, BundleView, FeaturePoint,
};
pub use pgm::{read_pgm, write_pgm, GrayImage};
pub use ply::{read_ply, write_ply, PlyFormat};
pub use truth::{
    read_ground_truth, write_ground_truth, write_ground_truth_with_comments, GroundTruthRow,
};
