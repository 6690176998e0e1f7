use pipefit_core::cylinder::{detect_all, CylinderModel, DetectConfig, SeedPlaneSpec};
use pipefit_core::geom::{perpendicular_basis, Plane, Point3, PointCloud, UnitVec3, Vec3};
use pipefit_core::synth::{match_to_truth, sample_scene, CylinderSpec, SceneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn yard_scene(density_factor: f64, seed: u64) -> SceneSpec {
    let radii_mm = [8.6, 36.5, 36.5, 57.5, 84.1, 109.5];
    SceneSpec {
        cylinders: radii_mm
            .iter()
            .enumerate()
            .map(|(i, r)| CylinderSpec {
                radius_m: r / 1000.0,
                axis: [0.0, 0.0, 1.0],
                base: [0.45 * i as f64, 0.0, 0.0],
                length_m: 2.4,
                visible_arc_deg: 240.0,
                density_pts_per_m2: 120_000.0 * density_factor,
                noise_sigma_m: 0.002,
                class_id: None,
            })
            .collect(),
        outlier_fraction: 0.02,
        seed,
    }
}

#[test]
#[ignore]
fn debug_yard() {
    let scene = sample_scene(&yard_scene(1.0, 0xACCE_0005)).unwrap();
    println!("cloud points: {}", scene.cloud.points.len());
    let plane = SeedPlaneSpec::Explicit(Plane::new(Vec3::z(), -1.2).unwrap());
    let detection = detect_all(&scene.cloud, &plane, &DetectConfig::default()).unwrap();
    println!("models: {}", detection.models.len());
    for (i, m) in detection.models.iter().enumerate() {
        println!(
            "model {i}: r={:.4} len={:.3} axis=({:.3},{:.3},{:.3}) pt=({:.3},{:.3},{:.3}) inliers={} rmse={:.4}",
            m.radius, m.length, m.axis.x, m.axis.y, m.axis.z,
            m.axis_point.x, m.axis_point.y, m.axis_point.z,
            m.inliers.len(), m.radial_rmse
        );
    }
    for t in &scene.truth {
        println!(
            "truth {}: r={:.4} len={:.3} base=({:.3},{:.3},{:.3})",
            t.pipe_id, t.radius_m, t.length_m, t.base[0], t.base[1], t.base[2]
        );
    }
    let assigned = match_to_truth(&detection.models, &scene.truth);
    println!("assigned: {assigned:?}");
    println!("diagnostics:");
    for d in &detection.diagnostics {
        println!("  {}", serde_json::to_string(d).unwrap());
    }
}

// ---- replica of acceptance criterion 1 internals ----

fn cylinder_points(
    center: Point3,
    axis: &UnitVec3,
    radius: f64,
    axial_half: f64,
    band_half: f64,
    n: usize,
    arc_deg: f64,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Point3> {
    let (u, v) = perpendicular_basis(axis);
    let half_arc = arc_deg.to_radians() / 2.0;
    let noise = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    (0..n)
        .map(|i| {
            let phi = (rng.random::<f64>() * 2.0 - 1.0) * half_arc;
            let radial = u.into_inner() * phi.cos() + v.into_inner() * phi.sin();
            let draw = (rng.random::<f64>() * 2.0 - 1.0) * if i % 10 < 7 { band_half } else { axial_half };
            let t = if i % 10 < 7 {
                (draw - center.z - radius * radial.z) / axis.z
            } else {
                draw
            };
            let mut p = center + axis.into_inner() * t + radial * radius;
            if noise_sigma > 0.0 {
                p += Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
            }
            p
        })
        .collect()
}

fn tilted_axis(delta_rad: f64, azimuth_rad: f64) -> UnitVec3 {
    let s = delta_rad.sin();
    UnitVec3::new_normalize(Vec3::new(
        s * azimuth_rad.cos(),
        s * azimuth_rad.sin(),
        delta_rad.cos(),
    ))
}

struct SectionCase {
    radius: f64,
    axis: UnitVec3,
    center: Point3,
    cloud: PointCloud,
}

fn section_case(
    seed: u64,
    radius: f64,
    delta_rad: f64,
    arc_deg: f64,
    n: usize,
    noise_sigma: f64,
) -> SectionCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let azimuth = rng.random::<f64>() * std::f64::consts::TAU;
    let axis = tilted_axis(delta_rad, azimuth);
    let center = Point3::new(
        rng.random_range(-0.2..0.2),
        rng.random_range(-0.2..0.2),
        0.0,
    );
    let band_half = 0.009;
    let axial_half =
        (band_half + radius * delta_rad.sin()) / delta_rad.cos() + (0.6 * radius).max(0.03);
    let points = cylinder_points(
        center,
        &axis,
        radius,
        axial_half,
        band_half,
        n,
        arc_deg,
        noise_sigma,
        &mut rng,
    );
    SectionCase {
        radius,
        axis,
        center,
        cloud: PointCloud::metric(points).unwrap(),
    }
}

fn ground_plane() -> SeedPlaneSpec {
    SeedPlaneSpec::Explicit(Plane::new(Vec3::z(), 0.0).unwrap())
}

fn single_model(case: &SectionCase, config: &DetectConfig) -> Option<CylinderModel> {
    let detection = detect_all(&case.cloud, &ground_plane(), config).ok()?;
    detection.models.into_iter().max_by_key(|m| m.inliers.len())
}

#[test]
fn debug_criterion_1() {
    let configs: Vec<(u64, f64, f64)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
        (0..1000)
            .map(|i| {
                (
                    1_000 + i as u64,
                    rng.random_range(0.0086..=0.1223),
                    rng.random_range(0.0..74.5f64).to_radians(),
                )
            })
            .collect()
    };
    let detect_config = DetectConfig::default();
    let mut shown = 0;
    let mut n_none = 0;
    let mut n_bad = 0;
    for &(seed, radius, delta) in &configs {
        let case = section_case(seed, radius, delta, 360.0, 2600, 0.0);
        let model = single_model(&case, &detect_config);
        let fail_kind = match &model {
            None => {
                n_none += 1;
                "none"
            }
            Some(m) => {
                let rel = (m.radius - radius).abs() / radius;
                let angle = {
                    let dot = m.axis.dot(&case.axis).abs();
                    let cross = m.axis.cross(&case.axis).norm();
                    cross.atan2(dot)
                };
                if rel > 1e-9 || angle > 1e-6 {
                    n_bad += 1;
                    "bad"
                } else {
                    continue;
                }
            }
        };
        if shown < 6 {
            shown += 1;
            println!(
                "seed {seed} {fail_kind}: r={radius:.4} delta={:.1}deg center=({:.3},{:.3})",
                delta.to_degrees(),
                case.center.x,
                case.center.y
            );
            if let Some(m) = &model {
                let rel = (m.radius - radius).abs() / radius;
                println!(
                    "   model r={:.6} rel={rel:.3e} axis=({:.4},{:.4},{:.4}) true=({:.4},{:.4},{:.4}) rmse={:.2e} inliers={}",
                    m.radius, m.axis.x, m.axis.y, m.axis.z,
                    case.axis.x, case.axis.y, case.axis.z, m.radial_rmse, m.inliers.len()
                );
            }
            let det = detect_all(&case.cloud, &ground_plane(), &detect_config);
            match det {
                Ok(d) => {
                    for diag in &d.diagnostics {
                        println!("   {}", serde_json::to_string(diag).unwrap());
                    }
                }
                Err(e) => println!("   detect_all error: {e}"),
            }
        }
    }
    println!("total none={n_none} bad={n_bad}");
}

#[test]
fn debug_timing() {
    use std::time::Instant;
    let detect_config = DetectConfig::default();
    for &n in &[1000usize, 1100] {
        let t0 = Instant::now();
        let mut cases = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
        let configs: Vec<(u64, f64, f64)> = (0..1000)
            .map(|i| {
                (
                    1_000 + i as u64,
                    rng.random_range(0.0086..=0.1223),
                    rng.random_range(0.0..74.5f64).to_radians(),
                )
            })
            .collect();
        for &(seed, radius, delta) in &configs {
            let case = section_case(seed, radius, delta, 360.0, n, 0.0);
            if single_model(&case, &detect_config).is_some() {
                cases += 1;
            }
        }
        println!("n={n}: {} detected, {:.2} ms/case", cases, t0.elapsed().as_secs_f64() * 1000.0 / 1000.0);
    }
}
