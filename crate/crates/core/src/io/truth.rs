//! Ground-truth pipe table (CSV) used by evaluation reports.

use std::path::Path;

use crate::{Error, Result};

const HEADER: &str = "pipe_id,true_radius_mm,true_length_m,class_id";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthRow {
    pub pipe_id: u32,
    pub true_radius_mm: f64,
    pub true_length_m: f64,
    pub class_id: u32,
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRow>> {
    let text = std::fs::read_to_string(path)?;
    let err = |line_no: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        message: format!("line {line_no}: {message}"),
    };

    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != HEADER {
                return Err(err(i + 1, format!("expected header '{HEADER}'")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(i + 1, format!("expected 4 fields, got {}", fields.len())));
        }
        rows.push(GroundTruthRow {
            pipe_id: fields[0]
                .parse()
                .map_err(|_| err(i + 1, format!("bad pipe_id '{}'", fields[0])))?,
            true_radius_mm: fields[1]
                .parse()
                .map_err(|_| err(i + 1, format!("bad radius '{}'", fields[1])))?,
            true_length_m: fields[2]
                .parse()
                .map_err(|_| err(i + 1, format!("bad length '{}'", fields[2])))?,
            class_id: fields[3]
                .parse()
                .map_err(|_| err(i + 1, format!("bad class_id '{}'", fields[3])))?,
        });
    }
    if !saw_header {
        return Err(err(1, "empty file".into()));
    }
    Ok(rows)
}

pub fn write_ground_truth(path: &Path, rows: &[GroundTruthRow]) -> Result<()> {
    write_ground_truth_with_comments(path, rows, &[])
}

/// Like `write_ground_truth`, with leading `#` comment lines (readers skip
/// them) for provenance.
pub fn write_ground_truth_with_comments(
    path: &Path,
    rows: &[GroundTruthRow],
    comments: &[String],
) -> Result<()> {
    let mut s = String::new();
    for c in comments {
        s.push_str("# ");
        s.push_str(c);
        s.push('\n');
    }
    s.push_str(HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.pipe_id, r.true_radius_mm, r.true_length_m, r.class_id
        ));
    }
    std::fs::write(path, s)?;
    Ok(())
}
