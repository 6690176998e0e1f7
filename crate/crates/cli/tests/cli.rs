//! End-to-end runs of the `pipefit` binary: exit codes, file outputs,
//! determinism, and the chaining of subcommands.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pipefit_core::frames::ReconstructionBackend;
use pipefit_core::io::write_bundle;
use pipefit_core::progress::{write_class_table, PipeClass, PipeClassTable};
use pipefit_core::scale::write_board;
use pipefit_core::synth::{simulated_backend, SimBackendSpec};

fn pipefit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pipefit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, expected: i32) {
    let got = out.status.code().expect("exit code");
    assert_eq!(
        got,
        expected,
        "exit {got}, expected {expected}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("output exists"))
        .expect("valid json")
}

fn write_file(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// Two-pipe scene spec with light noise; detection should find both.
fn scene_spec_json(seed: u64) -> String {
    serde_json::json!({
        "cylinders": [
            {
                "radius_m": 0.0365,
                "axis": [0.0, 0.0, 1.0],
                "base": [0.0, 0.0, 0.0],
                "length_m": 1.2,
                "visible_arc_deg": 300.0,
                "density_pts_per_m2": 150000.0,
                "noise_sigma_m": 0.0005
            },
            {
                "radius_m": 0.0841,
                "axis": [0.0, 0.0, 1.0],
                "base": [0.6, 0.0, 0.0],
                "length_m": 1.2,
                "visible_arc_deg": 300.0,
                "density_pts_per_m2": 150000.0,
                "noise_sigma_m": 0.0005
            }
        ],
        "outlier_fraction": 0.01,
        "seed": seed
    })
    .to_string()
}

fn class_table_path(dir: &Path) -> PathBuf {
    let table = PipeClassTable {
        classes: vec![
            PipeClass {
                id: 1,
                label: "DN65".into(),
                outer_radius_m: 0.0365,
                material: "steel".into(),
            },
            PipeClass {
                id: 2,
                label: "DN150".into(),
                outer_radius_m: 0.0841,
                material: "steel".into(),
            },
        ],
    };
    let path = dir.join("classes.json");
    write_class_table(&path, &table).unwrap();
    path
}

/// synth scene -> detect; exercises the happy path and the output schema.
fn detect_two_pipes(dir: &Path) -> PathBuf {
    let spec = dir.join("scene.json");
    write_file(&spec, &scene_spec_json(41));
    let cloud = dir.join("cloud.ply");
    let truth = dir.join("truth.csv");
    let out = pipefit(&[
        "synth",
        "scene",
        "--spec",
        spec.to_str().unwrap(),
        "--out-cloud",
        cloud.to_str().unwrap(),
        "--out-truth",
        truth.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(truth.is_file());

    let cylinders = dir.join("cylinders.json");
    let out = pipefit(&[
        "detect",
        "--cloud",
        cloud.to_str().unwrap(),
        "--plane",
        "0,0,1,-0.6",
        "--out",
        cylinders.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    cylinders
}

#[test]
fn detect_finds_synthetic_pipes_and_reports_them() {
    let dir = tempfile::tempdir().unwrap();
    let cylinders = detect_two_pipes(dir.path());

    let parsed = read_json(&cylinders);
    let list = parsed["cylinders"].as_array().unwrap();
    assert_eq!(list.len(), 2, "expected both pipes: {parsed}");
    let mut radii: Vec<f64> =
        list.iter().map(|c| c["radius_m"].as_f64().unwrap()).collect();
    radii.sort_by(f64::total_cmp);
    assert!((radii[0] - 0.0365).abs() < 0.002, "small pipe radius {}", radii[0]);
    assert!((radii[1] - 0.0841).abs() < 0.002, "large pipe radius {}", radii[1]);
    assert_eq!(parsed["arbitrary_units"], serde_json::json!(false));
    assert!(parsed["meta"]["tool_version"].is_string());
    assert!(parsed["meta"]["config_hash"].is_string());
}

#[test]
fn detect_exits_two_when_nothing_is_found() {
    let dir = tempfile::tempdir().unwrap();
    // Sparse random scatter: the slab is populated but no cell cluster
    // reaches the ellipse stage.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let points: Vec<pipefit_core::geom::Point3> = (0..5000)
        .map(|_| {
            pipefit_core::geom::Point3::new(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            )
        })
        .collect();
    let cloud = pipefit_core::geom::PointCloud::metric(points).unwrap();
    let ply = dir.path().join("noise.ply");
    pipefit_core::io::write_ply(&ply, &cloud, pipefit_core::io::PlyFormat::Ascii, &[]).unwrap();

    let out_path = dir.path().join("out.json");
    let out = pipefit(&[
        "detect",
        "--cloud",
        ply.to_str().unwrap(),
        "--plane",
        "0,0,1,-0.5",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_code(&out, 2);
    let parsed = read_json(&out_path);
    assert_eq!(parsed["cylinders"].as_array().unwrap().len(), 0);
}

#[test]
fn detect_errors_on_missing_cloud_with_json_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("out.json");
    let out = pipefit(&[
        "--json-errors",
        "detect",
        "--cloud",
        dir.path().join("nope.ply").to_str().unwrap(),
        "--plane",
        "0,0,1,-0.5",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_code(&out, 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().next().expect("one error line");
    let parsed: serde_json::Value = serde_json::from_str(line).expect("json error line");
    assert!(parsed["error"].is_string());
    assert!(parsed["kind"].is_string());
    assert!(!out_path.exists());
}

#[test]
fn detect_rejects_malformed_plane_spec() {
    let dir = tempfile::tempdir().unwrap();
    let cylinders = dir.path().join("c.json");
    for bad in ["0,0,1", "a,b,c,d", "0,0,0,1"] {
        let out = pipefit(&[
            "detect",
            "--cloud",
            "unused.ply",
            "--plane",
            bad,
            "--out",
            cylinders.to_str().unwrap(),
        ]);
        assert_code(&out, 1);
    }
}

#[test]
fn classify_then_report_produces_stable_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cylinders = detect_two_pipes(dir.path());
    let classes = class_table_path(dir.path());

    let classified = dir.path().join("classified.json");
    let out = pipefit(&[
        "classify",
        "--cylinders",
        cylinders.to_str().unwrap(),
        "--classes",
        classes.to_str().unwrap(),
        "--out",
        classified.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let parsed = read_json(&classified);
    let ids: Vec<u64> = parsed["cylinders"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["class_id"].as_u64().unwrap())
        .collect();
    let mut sorted = ids.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, vec![1, 2]);

    let truth = dir.path().join("truth.csv");
    let report = |json: &Path, csv: &Path| {
        let out = pipefit(&[
            "report",
            "--cylinders",
            classified.to_str().unwrap(),
            "--classes",
            classes.to_str().unwrap(),
            "--truth",
            truth.to_str().unwrap(),
            "--out-json",
            json.to_str().unwrap(),
            "--out-csv",
            csv.to_str().unwrap(),
        ]);
        assert_code(&out, 0);
    };
    let json_a = dir.path().join("report_a.json");
    let csv_a = dir.path().join("report_a.csv");
    let json_b = dir.path().join("report_b.json");
    let csv_b = dir.path().join("report_b.csv");
    report(&json_a, &csv_a);
    report(&json_b, &csv_b);

    assert_eq!(std::fs::read(&json_a).unwrap(), std::fs::read(&json_b).unwrap());
    assert_eq!(std::fs::read(&csv_a).unwrap(), std::fs::read(&csv_b).unwrap());

    let parsed = read_json(&json_a);
    let quality = &parsed["quality"];
    assert_eq!(quality["precision"], serde_json::json!(1.0));
    assert_eq!(quality["recall"], serde_json::json!(1.0));
    assert_eq!(quality["accuracy"], serde_json::Value::Null);
    let csv_text = std::fs::read_to_string(&csv_a).unwrap();
    assert!(csv_text.starts_with("# tool_version="));
    assert!(csv_text.lines().last().unwrap().starts_with("total,"));
}

#[test]
fn report_without_truth_has_null_quality() {
    let dir = tempfile::tempdir().unwrap();
    let cylinders = detect_two_pipes(dir.path());
    let classes = class_table_path(dir.path());
    let json = dir.path().join("report.json");
    let out = pipefit(&[
        "report",
        "--cylinders",
        cylinders.to_str().unwrap(),
        "--classes",
        classes.to_str().unwrap(),
        "--out-json",
        json.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let parsed = read_json(&json);
    assert_eq!(parsed["quality"], serde_json::Value::Null);
    assert_eq!(parsed["totals"]["detected_count"], serde_json::json!(2));
}

#[test]
fn config_file_overrides_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cylinders = detect_two_pipes(dir.path());
    drop(cylinders);

    // min_support far above anything the scene produces: detect runs
    // cleanly but keeps nothing.
    let config = dir.path().join("strict.json");
    write_file(&config, r#"{"min_support": 100000}"#);
    let out_path = dir.path().join("none.json");
    let out = pipefit(&[
        "--config",
        config.to_str().unwrap(),
        "detect",
        "--cloud",
        dir.path().join("cloud.ply").to_str().unwrap(),
        "--plane",
        "0,0,1,-0.6",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_code(&out, 2);

    let bad = dir.path().join("bad.json");
    write_file(&bad, r#"{"min_suport": 10}"#);
    let out = pipefit(&[
        "--config",
        bad.to_str().unwrap(),
        "detect",
        "--cloud",
        dir.path().join("cloud.ply").to_str().unwrap(),
        "--plane",
        "0,0,1,-0.6",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_code(&out, 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("min_suport"), "stderr: {stderr}");
}

#[test]
fn classify_refuses_unscaled_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.json");
    write_file(&spec, &scene_spec_json(43));
    let cloud = dir.path().join("cloud.ply");
    assert_code(
        &pipefit(&[
            "synth",
            "scene",
            "--spec",
            spec.to_str().unwrap(),
            "--out-cloud",
            cloud.to_str().unwrap(),
        ]),
        0,
    );
    let cylinders = dir.path().join("c.json");
    let out = pipefit(&[
        "detect",
        "--cloud",
        cloud.to_str().unwrap(),
        "--plane",
        "0,0,1,-0.6",
        "--arbitrary-units",
        "--out",
        cylinders.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert_eq!(read_json(&cylinders)["arbitrary_units"], serde_json::json!(true));

    let classes = class_table_path(dir.path());
    let out = pipefit(&[
        "classify",
        "--cylinders",
        cylinders.to_str().unwrap(),
        "--classes",
        classes.to_str().unwrap(),
        "--out",
        dir.path().join("x.json").to_str().unwrap(),
    ]);
    assert_code(&out, 1);
}

fn sim_spec_json() -> String {
    serde_json::json!({
        "base_features": 60,
        "response": [
            [1.0 / 60.0, 0.97],
            [0.5, 0.95],
            [1.0, 0.9125],
            [2.0, 0.85],
            [4.0, 0.70]
        ],
        "noise_sigma": 0.0,
        "seed": 11
    })
    .to_string()
}

#[test]
fn frames_optimize_converges_on_simulated_video() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    write_file(
        &manifest,
        r#"{"video_id": "site-walk-01", "native_fps": 30.0, "duration_s": 20.0, "initial_fps": 1.0}"#,
    );
    let backend = dir.path().join("backend.json");
    write_file(&backend, &sim_spec_json());

    let out_path = dir.path().join("frames.json");
    let out = pipefit(&[
        "frames",
        "optimize",
        "--manifest",
        manifest.to_str().unwrap(),
        "--backend",
        backend.to_str().unwrap(),
        "--ov-min",
        "0.90",
        "--ov-max",
        "0.925",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let parsed = read_json(&out_path);
    assert_eq!(parsed["status"], serde_json::json!("converged"));
    assert_eq!(parsed["video_id"], serde_json::json!("site-walk-01"));
    let timestamps = parsed["timestamps"].as_array().unwrap();
    assert_eq!(timestamps.len(), 21);
    for t in timestamps {
        let t = t.as_f64().unwrap();
        let k = t * 30.0;
        assert!((k - k.round()).abs() < 1e-9, "timestamp {t} off the native grid");
    }
}

#[test]
fn frames_plan_reports_overlaps_and_actions() {
    let dir = tempfile::tempdir().unwrap();
    let spec: SimBackendSpec = serde_json::from_str(&sim_spec_json()).unwrap();
    let mut backend = simulated_backend(spec).unwrap();
    let timestamps: Vec<f64> = (0..6).map(|k| k as f64).collect();
    let bundle = backend.reconstruct(&timestamps).unwrap();
    let bundle_dir = dir.path().join("bundle");
    write_bundle(&bundle_dir, &bundle).unwrap();
    let ts_file = dir.path().join("timestamps.txt");
    write_file(&ts_file, "0\n1\n2\n3\n4\n5\n");

    // 1 s spacing sits mid-band: nothing to do.
    let out_path = dir.path().join("plan.json");
    let out = pipefit(&[
        "frames",
        "plan",
        "--bundle",
        bundle_dir.to_str().unwrap(),
        "--timestamps",
        ts_file.to_str().unwrap(),
        "--ov-min",
        "0.90",
        "--ov-max",
        "0.925",
        "--fps",
        "30",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let parsed = read_json(&out_path);
    assert_eq!(parsed["converged"], serde_json::json!(true));
    assert_eq!(parsed["actions"].as_array().unwrap().len(), 0);
    for f in parsed["frames"].as_array().unwrap() {
        let ov = f["overlap"].as_f64().unwrap();
        assert!((ov - 0.9125).abs() < 1e-6, "overlap {ov}");
    }

    // A stricter band makes the same frame set under-connected.
    let out = pipefit(&[
        "frames",
        "plan",
        "--bundle",
        bundle_dir.to_str().unwrap(),
        "--timestamps",
        ts_file.to_str().unwrap(),
        "--ov-min",
        "0.94",
        "--ov-max",
        "0.96",
        "--fps",
        "30",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let parsed = read_json(&out_path);
    assert_eq!(parsed["converged"], serde_json::json!(false));
    let actions = parsed["actions"].as_array().unwrap();
    assert!(!actions.is_empty());
    for a in actions {
        assert_eq!(a["action"], serde_json::json!("add"));
    }
}

/// synth board -> scale: recover a non-unit scale from rendered rasters.
#[test]
fn scale_recovers_metric_factor_from_rendered_views() {
    let dir = tempfile::tempdir().unwrap();
    let true_scale = 0.05;

    // Cameras and board in reconstruction units (metric / true_scale);
    // the solver gets the metric board definition.
    let metric_board = serde_json::json!({
        "board_id": "gate-3",
        "circle_radius_m": 0.022,
        "centers_m": [
            [0.30, 0.05, 0.0],
            [0.02, 0.38, 0.0],
            [0.26, 0.22, 0.0],
            [0.16, 0.40, 0.0],
            [0.54, 0.04, 0.0]
        ]
    });
    let s = 1.0 / true_scale;
    let recon_centers: Vec<Vec<f64>> = metric_board["centers_m"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_array().unwrap().iter().map(|v| v.as_f64().unwrap() * s).collect())
        .collect();
    let intr = serde_json::json!({"model": "pinhole", "f": 1300.0, "cx": 480.0, "cy": 360.0});
    let mk_view = |id: u32, x: f64, y: f64, z: f64| {
        serde_json::json!({
            "view_id": id,
            "center_m": [x * s, y * s, z * s],
            "target_m": [0.26 * s, 0.22 * s, 0.0],
            "intrinsics": intr
        })
    };
    let scene = serde_json::json!({
        "board": {
            "board_id": "gate-3",
            "circle_radius_m": 0.022 * s,
            "centers_m": recon_centers
        },
        "views": [
            mk_view(0, -0.55, 0.30, 1.45),
            mk_view(1, 0.26, -0.18, 1.55),
            mk_view(2, 1.05, 0.52, 1.40)
        ],
        "width_px": 960,
        "height_px": 720
    });
    let scene_path = dir.path().join("board_scene.json");
    write_file(&scene_path, &scene.to_string());
    let out_dir = dir.path().join("rendered");
    let out = pipefit(&[
        "synth",
        "board",
        "--scene",
        scene_path.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    for id in 0..3 {
        assert!(out_dir.join(format!("view_{id}.pgm")).is_file());
    }

    let metric_board_path = dir.path().join("board_metric.json");
    write_file(&metric_board_path, &metric_board.to_string());
    let solution_path = dir.path().join("scale.json");
    let out = pipefit(&[
        "scale",
        "--bundle",
        out_dir.join("bundle").to_str().unwrap(),
        "--images",
        out_dir.to_str().unwrap(),
        "--board",
        metric_board_path.to_str().unwrap(),
        "--out",
        solution_path.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let parsed = read_json(&solution_path);
    let scale = parsed["scale"].as_f64().unwrap();
    assert!(
        (scale - true_scale).abs() / true_scale < 0.003,
        "scale {scale} vs true {true_scale}"
    );
    assert_eq!(parsed["eccentricity_applied"], serde_json::json!(true));
    assert_eq!(parsed["matched_targets"], serde_json::json!(5));

    // Same inputs without the center correction.
    let out = pipefit(&[
        "scale",
        "--bundle",
        out_dir.join("bundle").to_str().unwrap(),
        "--images",
        out_dir.to_str().unwrap(),
        "--board",
        metric_board_path.to_str().unwrap(),
        "--no-eccentricity",
        "--out",
        solution_path.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let parsed = read_json(&solution_path);
    assert_eq!(parsed["eccentricity_applied"], serde_json::json!(false));
    assert_eq!(parsed["scale"], parsed["preliminary_scale"]);
}

#[test]
fn scale_requires_two_views() {
    let dir = tempfile::tempdir().unwrap();
    // A one-view bundle.
    let bundle = pipefit_core::io::Bundle {
        views: vec![pipefit_core::io::BundleView {
            id: 0,
            quat: [1.0, 0.0, 0.0, 0.0],
            center: [0.0, 0.0, 0.0],
            intrinsics_id: 0,
        }],
        intrinsics: vec![pipefit_core::io::BundleIntrinsics {
            id: 0,
            model: "pinhole".into(),
            values: vec![1000.0, 480.0, 360.0],
        }],
        points: Vec::new(),
        features: Default::default(),
    };
    let bundle_dir = dir.path().join("bundle");
    write_bundle(&bundle_dir, &bundle).unwrap();
    let board = pipefit_core::scale::TargetBoard {
        board_id: "b".into(),
        circle_radius_m: 0.02,
        centers_m: vec![[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.14, 0.0]],
    };
    let board_path = dir.path().join("board.json");
    write_board(&board_path, &board).unwrap();

    let out = pipefit(&[
        "scale",
        "--bundle",
        bundle_dir.to_str().unwrap(),
        "--images",
        dir.path().to_str().unwrap(),
        "--board",
        board_path.to_str().unwrap(),
        "--out",
        dir.path().join("out.json").to_str().unwrap(),
    ]);
    assert_code(&out, 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("insufficient views"), "stderr: {stderr}");
}

#[test]
fn experiment_sweeps_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    write_file(
        &config,
        r#"{
            "exp_views": 4,
            "exp_ks": [2, 3],
            "exp_combinations": 3,
            "noise_sigma_px": 0.05,
            "exp_overlaps_percent": [95.0],
            "exp_density_pts_per_m2": 120000.0,
            "seed": 5
        }"#,
    );

    let sv = dir.path().join("scale_views.csv");
    let out = pipefit(&[
        "--config",
        config.to_str().unwrap(),
        "experiment",
        "scale-views",
        "--out",
        sv.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&sv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# tool_version="));
    assert!(lines[1].starts_with("k,combinations,failures"));
    assert_eq!(lines.len(), 4, "comment + header + one row per k: {text}");
    for row in &lines[2..] {
        let failures: usize = row.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(failures, 0, "row {row}");
    }

    let od = dir.path().join("overlap.csv");
    let out = pipefit(&[
        "--config",
        config.to_str().unwrap(),
        "experiment",
        "overlap-detection",
        "--out",
        od.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&od).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "comment + header + one row: {text}");
    let fields: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(fields[0], "95");
    assert_eq!(fields[2], "6", "true pipe count: {text}");
    let f_measure: f64 = fields[9].parse().unwrap();
    assert!(f_measure > 0.9, "f-measure at full density: {text}");
}
