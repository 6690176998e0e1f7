use pipefit_core::cylinder::{detect_all, SeedPlaneSpec};
use pipefit_core::geom::UnitState;
use pipefit_core::io::read_ply;
use pipefit_core::Result;

use crate::config::{Meta, RunConfig};
use crate::model::{CylinderFile, CylinderRecord};
use crate::DetectArgs;

use super::{parse_plane, write_json};

/// Exit 0 with at least one cylinder, 2 on a clean run that found none.
pub fn run(args: &DetectArgs, config: &RunConfig) -> Result<u8> {
    let unit_state = if args.arbitrary_units { UnitState::Arbitrary } else { UnitState::Metric };
    let cloud = read_ply(&args.cloud, unit_state)?;
    let plane = parse_plane(&args.plane)?;
    let detect_config = config.detect_config()?;

    let detection = detect_all(&cloud, &SeedPlaneSpec::Explicit(plane), &detect_config)?;
    let cylinders: Vec<CylinderRecord> = detection
        .models
        .iter()
        .enumerate()
        .map(|(i, m)| CylinderRecord::from_model(i as u32, m))
        .collect();
    let found = !cylinders.is_empty();

    write_json(
        &args.out,
        &CylinderFile {
            meta: Meta::new(config, None),
            arbitrary_units: detection.arbitrary_units,
            cylinders,
        },
    )?;
    Ok(if found { 0 } else { 2 })
}
