use pipefit_core::io::read_ground_truth;
use pipefit_core::progress::{
    build_report, classify_kmeans, read_class_table, report_to_csv, ClassifiedPipe,
    PipeClassTable, ReportMeta,
};
use pipefit_core::{Error, Result};

use crate::config::{Meta, RunConfig};
use crate::model::{read_cylinder_file, CylinderFile, CylinderRecord};
use crate::{ClassifyArgs, ReportArgs};

use super::write_json;

fn assign_classes(records: &mut [CylinderRecord], table: &PipeClassTable) -> Result<()> {
    let radii: Vec<f64> = records.iter().map(|r| r.radius_m).collect();
    let classes = classify_kmeans(&radii, table)?;
    for (record, class_id) in records.iter_mut().zip(classes) {
        let planned = table.class(class_id).expect("assigned class exists").outer_radius_m;
        record.class_id = Some(class_id);
        record.radius_residual_m = Some(record.radius_m - planned);
    }
    Ok(())
}

pub fn classify(args: &ClassifyArgs, config: &RunConfig) -> Result<u8> {
    let mut file = read_cylinder_file(&args.cylinders)?;
    if file.arbitrary_units {
        return Err(Error::InvalidInput(
            "cloud units are arbitrary; apply the metric scale before classifying".into(),
        ));
    }
    let table = read_class_table(&args.classes)?;
    assign_classes(&mut file.cylinders, &table)?;
    file.meta = Meta::new(config, file.meta.seed);
    write_json(&args.out, &file)?;
    Ok(0)
}

fn classified_pipes(file: &CylinderFile, table: &PipeClassTable) -> Result<Vec<ClassifiedPipe>> {
    let mut records = file.cylinders.clone();
    if records.iter().any(|r| r.class_id.is_none()) {
        assign_classes(&mut records, table)?;
    }
    records
        .iter()
        .map(|r| {
            let class_id = r.class_id.expect("class assigned above");
            let planned = table
                .class(class_id)
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "pipe {} references unknown class {class_id}",
                        r.pipe_id
                    ))
                })?
                .outer_radius_m;
            Ok(ClassifiedPipe {
                pipe_id: r.pipe_id,
                cylinder: r.to_model()?,
                class_id,
                radius_residual_m: r.radius_residual_m.unwrap_or(r.radius_m - planned),
            })
        })
        .collect()
}

pub fn report(args: &ReportArgs, config: &RunConfig) -> Result<u8> {
    let file = read_cylinder_file(&args.cylinders)?;
    if file.arbitrary_units {
        return Err(Error::InvalidInput(
            "cloud units are arbitrary; apply the metric scale before reporting".into(),
        ));
    }
    let table = read_class_table(&args.classes)?;
    let pipes = classified_pipes(&file, &table)?;
    let truth = match &args.truth {
        Some(path) => Some(read_ground_truth(path)?),
        None => None,
    };

    let cli_meta = Meta::new(config, file.meta.seed);
    let meta = ReportMeta {
        generated_at: args.timestamp.clone().unwrap_or_default(),
        tool_version: cli_meta.tool_version.clone(),
        config_hash: cli_meta.config_hash.clone(),
        seed: cli_meta.seed,
    };
    let report = build_report(&pipes, &table, truth.as_deref(), meta)?;

    write_json(&args.out_json, &report)?;
    if let Some(csv_path) = &args.out_csv {
        let mut text = cli_meta.csv_comment();
        text.push('\n');
        text.push_str(&report_to_csv(&report));
        std::fs::write(csv_path, text)?;
    }
    Ok(0)
}
