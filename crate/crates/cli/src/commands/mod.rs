pub mod detect;
pub mod experiment;
pub mod frames;
pub mod report;
pub mod scale;
pub mod synth;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use pipefit_core::geom::{Plane, Vec3};
use pipefit_core::{Error, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// "nx,ny,nz,d" for the plane nx*x + ny*y + nz*z + d = 0.
pub fn parse_plane(spec: &str) -> Result<Plane> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidInput(format!("bad plane spec '{spec}'")))?;
    if parts.len() != 4 {
        return Err(Error::InvalidInput(format!(
            "plane spec needs 4 numbers nx,ny,nz,d, got {}",
            parts.len()
        )));
    }
    Plane::new(Vec3::new(parts[0], parts[1], parts[2]), parts[3])
}

/// One timestamp in seconds per line; blank lines and `#` comments skipped.
pub fn read_timestamps(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.split('#').next().unwrap_or("").trim();
        if trimmed.is_empty() {
            continue;
        }
        let t: f64 = trimmed.parse().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            message: format!("line {}: bad timestamp '{trimmed}'", i + 1),
        })?;
        out.push(t);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: "no timestamps".into(),
        });
    }
    Ok(out)
}
