use serde::{Deserialize, Serialize};

use pipefit_core::geom::{Point3, Vec3};
use pipefit_core::io::{
    write_bundle, write_ground_truth_with_comments, write_pgm, write_ply, Bundle,
    BundleIntrinsics, BundleView, GroundTruthRow, PlyFormat,
};
use pipefit_core::scale::{write_board, CameraView, Intrinsics, TargetBoard};
use pipefit_core::synth::{render_board, sample_scene, SceneSpec};
use pipefit_core::{Error, Result};

use crate::config::{Meta, RunConfig};
use crate::{SynthBoardArgs, SynthSceneArgs};

use super::{read_json, write_json};

pub fn scene(args: &SynthSceneArgs, config: &RunConfig) -> Result<u8> {
    let spec: SceneSpec = read_json(&args.spec)?;
    let seed = spec.seed;
    let generated = sample_scene(&spec)?;
    let meta = Meta::new(config, Some(seed));

    let format = if args.ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    write_ply(&args.out_cloud, &generated.cloud, format, &[meta.kv_line()])?;

    if let Some(truth_path) = &args.out_truth {
        let rows: Vec<GroundTruthRow> = generated
            .truth
            .iter()
            .map(|t| GroundTruthRow {
                pipe_id: t.pipe_id as u32,
                true_radius_mm: t.radius_m * 1000.0,
                true_length_m: t.length_m,
                class_id: t.class_id,
            })
            .collect();
        write_ground_truth_with_comments(truth_path, &rows, &[meta.kv_line()])?;
    }
    Ok(0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoardViewSpec {
    view_id: u32,
    /// Camera center in the metric scene frame.
    center_m: [f64; 3],
    /// Point the optical axis goes through.
    target_m: [f64; 3],
    /// Roll reference; defaults to +Y.
    #[serde(default)]
    up: Option<[f64; 3]>,
    intrinsics: Intrinsics,
}

/// A target board observed by a set of posed cameras.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoardSceneSpec {
    board: TargetBoard,
    views: Vec<BoardViewSpec>,
    width_px: u32,
    height_px: u32,
}

#[derive(Serialize)]
struct ViewCenters {
    view_id: u32,
    /// Exact projections of the circle centers (distorted pixels, board
    /// order). The rendered blob centers differ by the eccentricity bias.
    centers_px: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct CentersOutput {
    meta: Meta,
    board_id: String,
    views: Vec<ViewCenters>,
}

fn intrinsics_record(id: u32, intr: &Intrinsics) -> BundleIntrinsics {
    match *intr {
        Intrinsics::Pinhole { f, cx, cy } => BundleIntrinsics {
            id,
            model: "pinhole".into(),
            values: vec![f, cx, cy],
        },
        Intrinsics::Radial { f, cx, cy, k1, k2 } => BundleIntrinsics {
            id,
            model: "radial".into(),
            values: vec![f, cx, cy, k1, k2],
        },
    }
}

pub fn board(args: &SynthBoardArgs, config: &RunConfig) -> Result<u8> {
    let spec: BoardSceneSpec = read_json(&args.scene)?;
    if spec.views.is_empty() {
        return Err(Error::InvalidInput("board scene has no views".into()));
    }
    spec.board.validate()?;
    std::fs::create_dir_all(&args.out_dir)?;
    let meta = Meta::new(config, None);

    let mut bundle = Bundle::default();
    let mut centers = Vec::with_capacity(spec.views.len());
    for vs in &spec.views {
        let up = vs.up.unwrap_or([0.0, 1.0, 0.0]);
        let view = CameraView::looking_at(
            vs.view_id,
            Point3::new(vs.center_m[0], vs.center_m[1], vs.center_m[2]),
            Point3::new(vs.target_m[0], vs.target_m[1], vs.target_m[2]),
            Vec3::new(up[0], up[1], up[2]),
            vs.intrinsics,
        );
        let rendered = render_board(&spec.board, &view, spec.width_px, spec.height_px)?;

        let raster = args.out_dir.join(format!("view_{}.pgm", vs.view_id));
        write_pgm(&raster, &rendered.image, &[meta.kv_line()])?;
        centers.push(ViewCenters {
            view_id: vs.view_id,
            centers_px: rendered.centers_px.iter().map(|p| [p.x, p.y]).collect(),
        });

        let intr_record = intrinsics_record(0, &vs.intrinsics);
        let intr_id = match bundle
            .intrinsics
            .iter()
            .position(|i| i.model == intr_record.model && i.values == intr_record.values)
        {
            Some(pos) => bundle.intrinsics[pos].id,
            None => {
                let id = bundle.intrinsics.len() as u32;
                bundle.intrinsics.push(BundleIntrinsics { id, ..intr_record });
                id
            }
        };
        let q = view.rotation;
        bundle.views.push(BundleView {
            id: vs.view_id,
            quat: [q.w, q.i, q.j, q.k],
            center: [view.center.x, view.center.y, view.center.z],
            intrinsics_id: intr_id,
        });
    }

    write_bundle(&args.out_dir.join("bundle"), &bundle)?;
    write_board(&args.out_dir.join("board.json"), &spec.board)?;
    write_json(
        &args.out_dir.join("centers.json"),
        &CentersOutput { meta, board_id: spec.board.board_id.clone(), views: centers },
    )?;
    Ok(0)
}
