//! On-disk schema for cylinder lists passed between `detect`, `classify`,
//! and `report`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use pipefit_core::cylinder::CylinderModel;
use pipefit_core::geom::{Point3, UnitVec3, Vec3};
use pipefit_core::{Error, Result};

use crate::config::Meta;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderRecord {
    pub pipe_id: u32,
    /// Unit axis direction.
    pub axis: [f64; 3],
    /// A point on the axis (segment midpoint).
    pub axis_point_m: [f64; 3],
    pub radius_m: f64,
    pub length_m: f64,
    pub inlier_count: usize,
    pub radial_rmse_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_residual_m: Option<f64>,
}

impl CylinderRecord {
    pub fn from_model(pipe_id: u32, model: &CylinderModel) -> Self {
        CylinderRecord {
            pipe_id,
            axis: [model.axis.x, model.axis.y, model.axis.z],
            axis_point_m: [model.axis_point.x, model.axis_point.y, model.axis_point.z],
            radius_m: model.radius,
            length_m: model.length,
            inlier_count: model.inliers.len(),
            radial_rmse_m: model.radial_rmse,
            class_id: None,
            radius_residual_m: None,
        }
    }

    /// Rebuild the geometric model. Inlier indices are not round-tripped
    /// through the file; only the count survives.
    pub fn to_model(&self) -> Result<CylinderModel> {
        let axis = Vec3::new(self.axis[0], self.axis[1], self.axis[2]);
        if axis.norm() < 1e-12 {
            return Err(Error::InvalidInput(format!(
                "pipe {}: zero-length axis",
                self.pipe_id
            )));
        }
        Ok(CylinderModel {
            axis: UnitVec3::new_normalize(axis),
            axis_point: Point3::new(
                self.axis_point_m[0],
                self.axis_point_m[1],
                self.axis_point_m[2],
            ),
            radius: self.radius_m,
            length: self.length_m,
            inliers: Vec::new(),
            radial_rmse: self.radial_rmse_m,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderFile {
    pub meta: Meta,
    /// Radii and lengths are in cloud units, not meters, when set.
    #[serde(default)]
    pub arbitrary_units: bool,
    pub cylinders: Vec<CylinderRecord>,
}

pub fn read_cylinder_file(path: &Path) -> Result<CylinderFile> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
