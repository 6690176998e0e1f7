//! Binary PGM (P5, 8-bit) rasters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, Result};

/// An 8-bit grayscale raster, row-major, origin at the top-left pixel.
/// Pixel centers are at integer coordinates, so pixel `(x, y)` covers
/// `[x - 0.5, x + 0.5) x [y - 0.5, y + 0.5)` in image coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, pixels: vec![0; (width as usize) * (height as usize)] }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.pixels[y as usize * self.width as usize + x as usize] = v;
    }

    /// Bilinear sample at a subpixel position, clamped at the borders.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as u32;
        let y0 = yc.floor() as u32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let p00 = self.get(x0, y0) as f64;
        let p10 = self.get(x1, y0) as f64;
        let p01 = self.get(x0, y1) as f64;
        let p11 = self.get(x1, y1) as f64;
        p00 * (1.0 - fx) * (1.0 - fy)
            + p10 * fx * (1.0 - fy)
            + p01 * (1.0 - fx) * fy
            + p11 * fx * fy
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), message: message.into() }
}

/// Read a binary PGM (P5) file. Comments (`#` to end of line) are allowed
/// anywhere in the header; maxval must fit 8 bits.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;

    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(path, "unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if next_token(&bytes)? != "P5" {
        return Err(parse_err(path, "not a P5 PGM"));
    }
    let width: u32 =
        next_token(&bytes)?.parse().map_err(|_| parse_err(path, "bad width"))?;
    let height: u32 =
        next_token(&bytes)?.parse().map_err(|_| parse_err(path, "bad height"))?;
    let maxval: u32 =
        next_token(&bytes)?.parse().map_err(|_| parse_err(path, "bad maxval"))?;
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(path, format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the data.
    pos += 1;
    let expected = width as usize * height as usize;
    if bytes.len() < pos + expected {
        return Err(parse_err(
            path,
            format!("expected {expected} pixel bytes, got {}", bytes.len().saturating_sub(pos)),
        ));
    }
    Ok(GrayImage { width, height, pixels: bytes[pos..pos + expected].to_vec() })
}

/// Write a binary PGM (P5); `comments` land in the header.
pub fn write_pgm(path: &Path, image: &GrayImage, comments: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "P5")?;
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{} {}", image.width, image.height)?;
    writeln!(w, "255")?;
    w.write_all(&image.pixels)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let mut img = GrayImage::new(13, 7);
        for (i, p) in img.pixels.iter_mut().enumerate() {
            *p = (i * 3 % 256) as u8;
        }
        write_pgm(&path, &img, &["rendered with seed 42".into()]).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn header_comments_between_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        let mut bytes = b"P5\n# one\n3 # two\n2\n# three\n255\n".to_vec();
        bytes.extend_from_slice(&[10, 20, 30, 40, 50, 60]);
        std::fs::write(&path, &bytes).unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!((img.width, img.height), (3, 2));
        assert_eq!(img.get(2, 1), 60);
    }

    #[test]
    fn short_data_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.pgm");
        std::fs::write(&path, b"P5\n4 4\n255\nxx").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn sixteen_bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.pgm");
        std::fs::write(&path, b"P5\n1 1\n65535\n\0\0").unwrap();
        assert!(read_pgm(&path).is_err());
    }

    #[test]
    fn bilinear_sampling_interpolates() {
        let mut img = GrayImage::new(2, 1);
        img.set(0, 0, 0);
        img.set(1, 0, 100);
        assert_eq!(img.sample(0.5, 0.0), 50.0);
        assert_eq!(img.sample(0.25, 0.0), 25.0);
    }
}
