use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pipefit_core::cylinder::{DetectConfig, LengthMode};
use pipefit_core::{Error, Result};

/// Tunables shared by all subcommands, loaded from `--config FILE` and
/// overridden by flags. Unknown keys are rejected; every length field
/// names its unit.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    // frame planning
    pub ov_min: Option<f64>,
    pub ov_max: Option<f64>,
    pub native_fps: Option<f64>,
    pub initial_fps: Option<f64>,
    pub max_iters: Option<usize>,

    // cylinder detection
    pub slab_half_width_m: Option<f64>,
    pub cell_size_m: Option<f64>,
    pub min_radius_m: Option<f64>,
    pub max_radius_m: Option<f64>,
    pub min_inlier_ratio: Option<f64>,
    pub max_axis_ratio: Option<f64>,
    pub min_points: Option<usize>,
    pub min_support: Option<usize>,
    pub max_delta_deg: Option<f64>,
    pub merge_axis_deg: Option<f64>,
    /// "trimmed_percentile" (default) or "min_max".
    pub length_mode: Option<String>,

    // target boards / scale
    pub no_eccentricity: Option<bool>,
    pub target_min_area_px: Option<usize>,
    pub target_max_rms_px: Option<f64>,

    // cloud accuracy
    pub accuracy_cutoff_m: Option<f64>,

    // experiments and synthetic data
    pub seed: Option<u64>,
    pub noise_sigma_px: Option<f64>,
    pub exp_views: Option<usize>,
    pub exp_ks: Option<Vec<usize>>,
    pub exp_combinations: Option<usize>,
    pub exp_true_scale: Option<f64>,
    pub exp_overlaps_percent: Option<Vec<f64>>,
    pub exp_density_pts_per_m2: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })
            }
        }
    }

    /// Hash of the effective (merged) configuration, recorded in outputs so
    /// a result can be traced to the exact settings that produced it.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..16].to_string()
    }

    pub fn detect_config(&self) -> Result<DetectConfig> {
        let mut cfg = DetectConfig::default();
        if let Some(v) = self.slab_half_width_m {
            cfg.slab_half_width_m = v;
        }
        if let Some(v) = self.cell_size_m {
            cfg.cell_size_m = v;
        }
        if let Some(v) = self.min_radius_m {
            cfg.gate.min_radius_m = v;
        }
        if let Some(v) = self.max_radius_m {
            cfg.gate.max_radius_m = v;
        }
        if let Some(v) = self.min_inlier_ratio {
            cfg.gate.min_inlier_ratio = v;
        }
        if let Some(v) = self.max_axis_ratio {
            cfg.gate.max_axis_ratio = v;
        }
        if let Some(v) = self.min_points {
            cfg.gate.min_points = v;
        }
        if let Some(v) = self.min_support {
            cfg.min_support = v;
        }
        if let Some(v) = self.max_delta_deg {
            cfg.max_delta_deg = v;
        }
        if let Some(v) = self.merge_axis_deg {
            cfg.merge_axis_deg = v;
        }
        if let Some(mode) = &self.length_mode {
            cfg.length_mode = match mode.as_str() {
                "trimmed_percentile" => LengthMode::TrimmedPercentile,
                "min_max" => LengthMode::MinMax,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown length_mode '{other}' (expected trimmed_percentile or min_max)"
                    )))
                }
            };
        }
        Ok(cfg)
    }
}

/// Provenance block embedded in every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub tool_version: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Meta {
    pub fn new(config: &RunConfig, seed: Option<u64>) -> Self {
        Meta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            seed,
        }
    }

    /// Provenance as a single `key=value` line for file comments.
    pub fn kv_line(&self) -> String {
        match self.seed {
            Some(s) => format!(
                "tool_version={} config_hash={} seed={s}",
                self.tool_version, self.config_hash
            ),
            None => {
                format!("tool_version={} config_hash={}", self.tool_version, self.config_hash)
            }
        }
    }

    /// The same provenance as a CSV comment line.
    pub fn csv_comment(&self) -> String {
        format!("# {}", self.kv_line())
    }
}
