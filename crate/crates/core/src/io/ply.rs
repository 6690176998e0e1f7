//! PLY point-cloud reader/writer.
//!
//! Reads ASCII and binary (either endianness) files with float or double
//! x/y/z and optional uchar red/green/blue; unknown scalar vertex
//! properties are skipped. Writes double-precision vertices.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::geom::{Point3, PointCloud, UnitState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 => 4,
            Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

struct Property {
    name: String,
    ty: Scalar,
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), message: message.into() }
}

/// Read a PLY file into a point cloud with the given unit state.
pub fn read_ply(path: &Path, unit_state: UnitState) -> Result<PointCloud> {
    let mut reader = BufReader::new(File::open(path)?);

    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(parse_err(path, "missing 'ply' magic"));
    }

    let mut format = None;
    let mut vertex_count: Option<usize> = None;
    let mut properties: Vec<Property> = Vec::new();
    // Elements listed before "vertex" must be empty for binary reads to
    // locate the vertex block; track them.
    let mut pre_vertex_elements = 0usize;
    let mut in_vertex_element = false;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(parse_err(path, "header ended before end_header"));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                format = Some(match *fmt {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => PlyFormat::BinaryBigEndian,
                    other => return Err(parse_err(path, format!("unknown format '{other}'"))),
                });
            }
            ["element", "vertex", n] => {
                vertex_count =
                    Some(n.parse().map_err(|_| parse_err(path, "bad vertex count"))?);
                in_vertex_element = true;
            }
            ["element", _, n] => {
                let count: usize =
                    n.parse().map_err(|_| parse_err(path, "bad element count"))?;
                if vertex_count.is_none() {
                    if count != 0 {
                        return Err(parse_err(
                            path,
                            "non-empty element precedes vertex element",
                        ));
                    }
                    pre_vertex_elements += 1;
                }
                in_vertex_element = false;
            }
            ["property", "list", ..] if in_vertex_element => {
                return Err(parse_err(path, "list property on vertex element unsupported"));
            }
            ["property", ty, name] if in_vertex_element => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| parse_err(path, format!("unknown type '{ty}'")))?;
                properties.push(Property { name: (*name).to_string(), ty });
            }
            ["property", ..] => {}
            ["end_header"] => break,
            other => {
                return Err(parse_err(path, format!("unrecognized header line {other:?}")))
            }
        }
    }
    let _ = pre_vertex_elements;
    let format = format.ok_or_else(|| parse_err(path, "missing format line"))?;
    let n = vertex_count.ok_or_else(|| parse_err(path, "missing vertex element"))?;

    let find = |name: &str| properties.iter().position(|p| p.name == name);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(parse_err(path, "vertex element lacks x/y/z")),
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some((r, g, b)),
        _ => None,
    };

    let mut points = Vec::with_capacity(n);
    let mut colors = rgb.map(|_| Vec::with_capacity(n));
    match format {
        PlyFormat::Ascii => {
            let mut read = 0usize;
            while read < n {
                line.clear();
                if reader.read_line(&mut line)? == 0 {
                    return Err(parse_err(path, format!("expected {n} vertices, got {read}")));
                }
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(path, format!("bad vertex line: {e}")))?;
                if vals.is_empty() {
                    continue;
                }
                if vals.len() < properties.len() {
                    return Err(parse_err(path, "short vertex line"));
                }
                points.push(Point3::new(vals[ix], vals[iy], vals[iz]));
                if let (Some(cols), Some((r, g, b))) = (&mut colors, rgb) {
                    cols.push([vals[r] as u8, vals[g] as u8, vals[b] as u8]);
                }
                read += 1;
            }
        }
        PlyFormat::BinaryLittleEndian | PlyFormat::BinaryBigEndian => {
            let big = format == PlyFormat::BinaryBigEndian;
            let stride: usize = properties.iter().map(|p| p.ty.size()).sum();
            let mut buf = vec![0u8; stride];
            for _ in 0..n {
                reader.read_exact(&mut buf).map_err(|_| {
                    parse_err(path, format!("file truncated before {n} vertices"))
                })?;
                let mut offset = 0usize;
                let mut vals = Vec::with_capacity(properties.len());
                for p in &properties {
                    let mut slice = &buf[offset..offset + p.ty.size()];
                    let v = read_scalar(&mut slice, p.ty, big)?;
                    vals.push(v);
                    offset += p.ty.size();
                }
                points.push(Point3::new(vals[ix], vals[iy], vals[iz]));
                if let (Some(cols), Some((r, g, b))) = (&mut colors, rgb) {
                    cols.push([vals[r] as u8, vals[g] as u8, vals[b] as u8]);
                }
            }
        }
    }

    let cloud = PointCloud::new(points, unit_state)?;
    match colors {
        Some(c) => cloud.with_colors(c),
        None => Ok(cloud),
    }
}

fn read_scalar(slice: &mut &[u8], ty: Scalar, big: bool) -> Result<f64> {
    Ok(match (ty, big) {
        (Scalar::I8, _) => slice.read_i8()? as f64,
        (Scalar::U8, _) => slice.read_u8()? as f64,
        (Scalar::I16, false) => slice.read_i16::<LittleEndian>()? as f64,
        (Scalar::I16, true) => slice.read_i16::<BigEndian>()? as f64,
        (Scalar::U16, false) => slice.read_u16::<LittleEndian>()? as f64,
        (Scalar::U16, true) => slice.read_u16::<BigEndian>()? as f64,
        (Scalar::I32, false) => slice.read_i32::<LittleEndian>()? as f64,
        (Scalar::I32, true) => slice.read_i32::<BigEndian>()? as f64,
        (Scalar::U32, false) => slice.read_u32::<LittleEndian>()? as f64,
        (Scalar::U32, true) => slice.read_u32::<BigEndian>()? as f64,
        (Scalar::F32, false) => slice.read_f32::<LittleEndian>()? as f64,
        (Scalar::F32, true) => slice.read_f32::<BigEndian>()? as f64,
        (Scalar::F64, false) => slice.read_f64::<LittleEndian>()?,
        (Scalar::F64, true) => slice.read_f64::<BigEndian>()?,
    })
}

/// Write a cloud as PLY with double-precision coordinates; `comments` land
/// in the header (seeds, provenance).
pub fn write_ply(
    path: &Path,
    cloud: &PointCloud,
    format: PlyFormat,
    comments: &[String],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply")?;
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
        PlyFormat::BinaryBigEndian => "binary_big_endian",
    };
    writeln!(w, "format {fmt} 1.0")?;
    for c in comments {
        writeln!(w, "comment {c}")?;
    }
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    if cloud.colors.is_some() {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        match format {
            PlyFormat::Ascii => {
                match &cloud.colors {
                    Some(c) => writeln!(
                        w,
                        "{} {} {} {} {} {}",
                        p.x, p.y, p.z, c[i][0], c[i][1], c[i][2]
                    )?,
                    None => writeln!(w, "{} {} {}", p.x, p.y, p.z)?,
                };
            }
            PlyFormat::BinaryLittleEndian => {
                w.write_f64::<LittleEndian>(p.x)?;
                w.write_f64::<LittleEndian>(p.y)?;
                w.write_f64::<LittleEndian>(p.z)?;
                if let Some(c) = &cloud.colors {
                    w.write_all(&c[i])?;
                }
            }
            PlyFormat::BinaryBigEndian => {
                w.write_f64::<BigEndian>(p.x)?;
                w.write_f64::<BigEndian>(p.y)?;
                w.write_f64::<BigEndian>(p.z)?;
                if let Some(c) = &cloud.colors {
                    w.write_all(&c[i])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
