use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::frames::ReconstructionBackend;
use crate::io::{Bundle, BundleIntrinsics, BundlePoint, BundleView, FeaturePoint};
use crate::{Error, Result};

use super::derive_seed;

const IMAGE_W: f64 = 1600.0;
const IMAGE_H: f64 = 1200.0;
/// Interior tie slots reserved per neighboring frame.
const SLOTS: usize = 20;

/// Stand-in for a real video reconstruction: how strongly frames connect
/// as a function of their temporal spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBackendSpec {
    /// Feature points detected per frame.
    pub base_features: usize,
    /// Network overlap as a piecewise-linear function of the gap to the
    /// frame's farthest neighbor, seconds. Must not increase with the gap.
    pub response: Vec<(f64, f64)>,
    /// Per-frame overlap jitter, tied to the frame timestamp.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SimBackendSpec {
    pub fn validate(&self) -> Result<()> {
        if self.base_features < 8 + 2 * SLOTS {
            return Err(Error::InvalidInput(format!(
                "base_features {} too small; need at least {}",
                self.base_features,
                8 + 2 * SLOTS
            )));
        }
        if self.response.is_empty() {
            return Err(Error::InvalidInput("response curve is empty".into()));
        }
        for &(gap, ov) in &self.response {
            if !(gap > 0.0 && gap.is_finite()) {
                return Err(Error::InvalidInput(format!("bad response gap {gap}")));
            }
            if !(ov > 0.0 && ov <= 1.0) {
                return Err(Error::InvalidInput(format!("response overlap {ov} outside (0, 1]")));
            }
        }
        for w in self.response.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidInput("response gaps not strictly increasing".into()));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::InvalidInput(
                    "response must not increase with gap".into(),
                ));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("bad noise_sigma {}", self.noise_sigma)));
        }
        Ok(())
    }

    pub fn response_at(&self, gap: f64) -> f64 {
        let knots = &self.response;
        if gap <= knots[0].0 {
            return knots[0].1;
        }
        for w in knots.windows(2) {
            if gap <= w[1].0 {
                let t = (gap - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        knots[knots.len() - 1].1
    }
}

/// Deterministic fake backend; identical spec and timestamps reproduce the
/// bundle bit for bit.
pub struct SimBackend {
    spec: SimBackendSpec,
}

pub fn simulated_backend(spec: SimBackendSpec) -> Result<SimBackend> {
    spec.validate()?;
    Ok(SimBackend { spec })
}

impl SimBackend {
    fn overlap_for(&self, t: f64, max_gap: f64) -> f64 {
        let base = self.spec.response_at(max_gap);
        let noise = if self.spec.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.spec.seed, t.to_bits()));
            Normal::new(0.0, self.spec.noise_sigma).unwrap().sample(&mut rng)
        } else {
            0.0
        };
        (base + noise).clamp(0.01, 1.0)
    }
}

impl ReconstructionBackend for SimBackend {
    fn reconstruct(&mut self, timestamps: &[f64]) -> Result<Bundle> {
        if timestamps.len() < 2 {
            return Err(Error::InsufficientViews { needed: 2, got: timestamps.len() });
        }
        for w in timestamps.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidInput(
                    "timestamps must be strictly increasing".into(),
                ));
            }
        }
        let n = timestamps.len();
        let mut views = Vec::with_capacity(n);
        let mut features = BTreeMap::new();
        for (i, &t) in timestamps.iter().enumerate() {
            let gap_l = (i > 0).then(|| t - timestamps[i - 1]);
            let gap_r = (i + 1 < n).then(|| timestamps[i + 1] - t);
            let max_gap = gap_l.unwrap_or(0.0).max(gap_r.unwrap_or(0.0));
            let ov = self.overlap_for(t, max_gap);

            // Sub-rectangle whose area fraction of the image equals ov;
            // its corners become the tie hull.
            let w = IMAGE_W * ov.sqrt();
            let h = IMAGE_H * ov.sqrt();
            let x0 = (IMAGE_W - w) / 2.0;
            let y0 = (IMAGE_H - h) / 2.0;

            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.spec.seed, t.to_bits()));
            if self.spec.noise_sigma > 0.0 {
                // Skip the overlap-noise draw so positions follow it.
                let _ = Normal::new(0.0, self.spec.noise_sigma).unwrap().sample(&mut rng);
            }
            let inner_x = Uniform::new(x0 + 0.05 * w, x0 + 0.95 * w).unwrap();
            let inner_y = Uniform::new(y0 + 0.05 * h, y0 + 0.95 * h).unwrap();
            let full_x = Uniform::new(0.0, IMAGE_W).unwrap();
            let full_y = Uniform::new(0.0, IMAGE_H).unwrap();

            let mut pts = vec![
                FeaturePoint { kp_index: 0, x: 0.0, y: 0.0 },
                FeaturePoint { kp_index: 1, x: IMAGE_W, y: 0.0 },
                FeaturePoint { kp_index: 2, x: IMAGE_W, y: IMAGE_H },
                FeaturePoint { kp_index: 3, x: 0.0, y: IMAGE_H },
                FeaturePoint { kp_index: 4, x: x0, y: y0 },
                FeaturePoint { kp_index: 5, x: x0 + w, y: y0 },
                FeaturePoint { kp_index: 6, x: x0 + w, y: y0 + h },
                FeaturePoint { kp_index: 7, x: x0, y: y0 + h },
            ];
            for kp in 8..8 + 2 * SLOTS {
                pts.push(FeaturePoint {
                    kp_index: kp as u32,
                    x: inner_x.sample(&mut rng),
                    y: inner_y.sample(&mut rng),
                });
            }
            for kp in 8 + 2 * SLOTS..self.spec.base_features {
                pts.push(FeaturePoint {
                    kp_index: kp as u32,
                    x: full_x.sample(&mut rng),
                    y: full_y.sample(&mut rng),
                });
            }
            features.insert(i as u32, pts);
            views.push(BundleView {
                id: i as u32,
                quat: [1.0, 0.0, 0.0, 0.0],
                center: [t, 0.0, 0.0],
                intrinsics_id: 0,
            });
        }

        // Model points shared by consecutive frames: the four sub-rect
        // corners plus a match count that follows the response curve.
        let mut points = Vec::new();
        let mut next_id = 0u64;
        for i in 0..n - 1 {
            let gap = timestamps[i + 1] - timestamps[i];
            let mid = timestamps[i] + 0.5 * gap;
            for c in 0..4u32 {
                points.push(BundlePoint {
                    id: next_id,
                    xyz: [mid, c as f64, 0.0],
                    track: vec![(i as u32, 4 + c), (i as u32 + 1, 4 + c)],
                });
                next_id += 1;
            }
            let shared = (self.spec.response_at(gap) * SLOTS as f64).round() as usize;
            for j in 0..shared.min(SLOTS) {
                points.push(BundlePoint {
                    id: next_id,
                    xyz: [mid, 4.0 + j as f64, 1.0],
                    track: vec![
                        (i as u32, (8 + SLOTS + j) as u32),
                        (i as u32 + 1, (8 + j) as u32),
                    ],
                });
                next_id += 1;
            }
        }

        Ok(Bundle {
            views,
            intrinsics: vec![BundleIntrinsics {
                id: 0,
                model: "pinhole".into(),
                values: vec![1000.0, IMAGE_W / 2.0, IMAGE_H / 2.0],
            }],
            points,
            features,
        })
    }
}
