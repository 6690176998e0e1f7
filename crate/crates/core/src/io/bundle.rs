//! Sparse-model bundle: the text interchange format between a
//! reconstruction backend and this tool.
//!
//! A bundle directory holds four whitespace-separated UTF-8 files with `#`
//! comments:
//!
//! - `views.txt`: `view_id qw qx qy qz cx cy cz intrinsics_id` — rotation
//!   is a world-to-camera quaternion (scalar first), `c` the camera center.
//!   Only registered views are listed.
//! - `intrinsics.txt`: `id model f cx cy [coeffs...]` with model `pinhole`
//!   (no coefficients) or `radial` (`k1 k2`); `f` is the principal
//!   distance and `cx cy` the principal point, all in pixels.
//! - `points3d.txt`: `point_id x y z [view_id kp_index]...` — each pair is
//!   one track observation.
//! - `features.txt`: `view_id kp_index x y` — every detected feature point
//!   per view, in pixels (tie points are the subset referenced from
//!   `points3d.txt`). Optional: only frame planning needs it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BundleView {
    pub id: u32,
    /// World-to-camera rotation quaternion, scalar first.
    pub quat: [f64; 4],
    /// Camera center in the reconstruction frame.
    pub center: [f64; 3],
    pub intrinsics_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleIntrinsics {
    pub id: u32,
    pub model: String,
    /// Principal distance, principal point x/y, then model coefficients.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundlePoint {
    pub id: u64,
    pub xyz: [f64; 3],
    /// (view id, keypoint index) observations.
    pub track: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    pub kp_index: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub views: Vec<BundleView>,
    pub intrinsics: Vec<BundleIntrinsics>,
    pub points: Vec<BundlePoint>,
    /// Per-view feature lists; empty when `features.txt` is absent.
    pub features: BTreeMap<u32, Vec<FeaturePoint>>,
}

impl Bundle {
    pub fn view(&self, id: u32) -> Option<&BundleView> {
        self.views.iter().find(|v| v.id == id)
    }

    pub fn intrinsics_for(&self, view: &BundleView) -> Option<&BundleIntrinsics> {
        self.intrinsics.iter().find(|i| i.id == view.intrinsics_id)
    }

    /// Keypoint indices of `view_id` that participate in 3D tracks.
    pub fn tie_point_indices(&self, view_id: u32) -> Vec<u32> {
        let mut idx: Vec<u32> = self
            .points
            .iter()
            .flat_map(|p| p.track.iter())
            .filter(|(v, _)| *v == view_id)
            .map(|(_, k)| *k)
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

fn parse_err(path: &Path, line_no: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: format!("line {line_no}: {}", message.into()),
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let stripped = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = stripped.split_whitespace().collect();
        if tokens.is_empty() {
            None
        } else {
            Some((i + 1, tokens))
        }
    })
}

fn parse_f64(path: &Path, line_no: usize, token: &str) -> Result<f64> {
    token
        .parse()
        .map_err(|_| parse_err(path, line_no, format!("bad number '{token}'")))
}

fn parse_int<T: std::str::FromStr>(path: &Path, line_no: usize, token: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| parse_err(path, line_no, format!("bad integer '{token}'")))
}

/// Read a bundle directory; `features.txt` is optional.
pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    let views_path = dir.join("views.txt");
    let text = std::fs::read_to_string(&views_path)?;
    let mut views = Vec::new();
    for (no, t) in data_lines(&text) {
        if t.len() != 9 {
            return Err(parse_err(&views_path, no, format!("expected 9 fields, got {}", t.len())));
        }
        views.push(BundleView {
            id: parse_int(&views_path, no, t[0])?,
            quat: [
                parse_f64(&views_path, no, t[1])?,
                parse_f64(&views_path, no, t[2])?,
                parse_f64(&views_path, no, t[3])?,
                parse_f64(&views_path, no, t[4])?,
            ],
            center: [
                parse_f64(&views_path, no, t[5])?,
                parse_f64(&views_path, no, t[6])?,
                parse_f64(&views_path, no, t[7])?,
            ],
            intrinsics_id: parse_int(&views_path, no, t[8])?,
        });
    }

    let intr_path = dir.join("intrinsics.txt");
    let text = std::fs::read_to_string(&intr_path)?;
    let mut intrinsics = Vec::new();
    for (no, t) in data_lines(&text) {
        if t.len() < 5 {
            return Err(parse_err(&intr_path, no, "expected at least 5 fields"));
        }
        let values = t[2..]
            .iter()
            .map(|tok| parse_f64(&intr_path, no, tok))
            .collect::<Result<Vec<f64>>>()?;
        intrinsics.push(BundleIntrinsics {
            id: parse_int(&intr_path, no, t[0])?,
            model: t[1].to_string(),
            values,
        });
    }

    let pts_path = dir.join("points3d.txt");
    let text = std::fs::read_to_string(&pts_path)?;
    let mut points = Vec::new();
    for (no, t) in data_lines(&text) {
        if t.len() < 4 || (t.len() - 4) % 2 != 0 {
            return Err(parse_err(&pts_path, no, "expected id, xyz, then view/kp pairs"));
        }
        let mut track = Vec::with_capacity((t.len() - 4) / 2);
        for pair in t[4..].chunks_exact(2) {
            track.push((
                parse_int(&pts_path, no, pair[0])?,
                parse_int(&pts_path, no, pair[1])?,
            ));
        }
        points.push(BundlePoint {
            id: parse_int(&pts_path, no, t[0])?,
            xyz: [
                parse_f64(&pts_path, no, t[1])?,
                parse_f64(&pts_path, no, t[2])?,
                parse_f64(&pts_path, no, t[3])?,
            ],
            track,
        });
    }

    let feat_path = dir.join("features.txt");
    let mut features: BTreeMap<u32, Vec<FeaturePoint>> = BTreeMap::new();
    if feat_path.exists() {
        let text = std::fs::read_to_string(&feat_path)?;
        for (no, t) in data_lines(&text) {
            if t.len() != 4 {
                return Err(parse_err(&feat_path, no, "expected view_id kp_index x y"));
            }
            let view: u32 = parse_int(&feat_path, no, t[0])?;
            features.entry(view).or_default().push(FeaturePoint {
                kp_index: parse_int(&feat_path, no, t[1])?,
                x: parse_f64(&feat_path, no, t[2])?,
                y: parse_f64(&feat_path, no, t[3])?,
            });
        }
    }

    Ok(Bundle { views, intrinsics, points, features })
}

/// Write a bundle directory (all four files; `features.txt` only when any
/// features are present).
pub fn write_bundle(dir: &Path, bundle: &Bundle) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut s = String::from("# view_id qw qx qy qz cx cy cz intrinsics_id\n");
    for v in &bundle.views {
        writeln!(
            s,
            "{} {} {} {} {} {} {} {} {}",
            v.id,
            v.quat[0],
            v.quat[1],
            v.quat[2],
            v.quat[3],
            v.center[0],
            v.center[1],
            v.center[2],
            v.intrinsics_id
        )
        .expect("string write");
    }
    std::fs::write(dir.join("views.txt"), s)?;

    let mut s = String::from("# id model f cx cy [coeffs...]\n");
    for i in &bundle.intrinsics {
        write!(s, "{} {}", i.id, i.model).expect("string write");
        for v in &i.values {
            write!(s, " {v}").expect("string write");
        }
        s.push('\n');
    }
    std::fs::write(dir.join("intrinsics.txt"), s)?;

    let mut s = String::from("# point_id x y z [view_id kp_index]...\n");
    for p in &bundle.points {
        write!(s, "{} {} {} {}", p.id, p.xyz[0], p.xyz[1], p.xyz[2]).expect("string write");
        for (v, k) in &p.track {
            write!(s, " {v} {k}").expect("string write");
        }
        s.push('\n');
    }
    std::fs::write(dir.join("points3d.txt"), s)?;

    if !bundle.features.is_empty() {
        let mut s = String::from("# view_id kp_index x y\n");
        for (view, feats) in &bundle.features {
            for f in feats {
                writeln!(s, "{} {} {} {}", view, f.kp_index, f.x, f.y).expect("string write");
            }
        }
        std::fs::write(dir.join("features.txt"), s)?;
    }
    Ok(())
}
