//! Ground-truthed synthetic data: cylinder scenes, target-board rasters, and
//! a simulated reconstruction backend. Everything is byte-reproducible from
//! its spec plus a 64-bit seed.

mod backend;
mod board;
mod scene;

pub use backend::{simulated_backend, SimBackend, SimBackendSpec};
pub use board::{analytic_board_observations, render_board, RenderedBoard};
pub use scene::{
    match_to_truth, sample_cylinder_surface, sample_scene, CylinderSpec, LabeledScene, PipeTruth,
    SceneSpec,
};

/// Per-unit seed derivation (splitmix-style mix of the global seed and a
/// unit index) so parallel generation stays deterministic regardless of
/// execution order.
pub(crate) fn derive_seed(global: u64, unit: u64) -> u64 {
    let mut z = global ^ unit.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
