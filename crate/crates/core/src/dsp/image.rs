use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{BeamformGrid, DspError};
use crate::channel::FormatError;

pub const URBF_MAGIC: &[u8; 4] = b"URBF";
pub const URBF_VERSION: u32 = 1;

/// Log-compressed image, `values_db[[row (z), column (x)]]`, shallow rows
/// first.
#[derive(Debug, Clone, PartialEq)]
pub struct BModeImage {
    pub values_db: Array2<f64>,
    pub dynamic_range_db: f64,
    pub grid: BeamformGrid,
}

/// `20·log10(env / max env)` clipped to `[−dynamic_range_db, 0]`.
pub fn log_compress(env: &Array2<f64>, dynamic_range_db: f64, grid: BeamformGrid) -> Result<BModeImage, DspError> {
    if !(dynamic_range_db > 0.0 && dynamic_range_db.is_finite()) {
        return Err(DspError::InvalidDynamicRange(dynamic_range_db));
    }
    let peak = env.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(DspError::AllZero);
    }
    let values_db = env.mapv(|v| {
        if v > 0.0 {
            (20.0 * (v / peak).log10()).clamp(-dynamic_range_db, 0.0)
        } else {
            -dynamic_range_db
        }
    });
    Ok(BModeImage {
        values_db,
        dynamic_range_db,
        grid,
    })
}

/// 8-bit level of a dB value; halves round away from zero.
pub fn gray_level(v_db: f64, dynamic_range_db: f64) -> u8 {
    (255.0 * (v_db + dynamic_range_db) / dynamic_range_db).round().clamp(0.0, 255.0) as u8
}

/// Writes the image as a binary graymap (`P5`), one row per depth.
pub fn export_image(img: &BModeImage, path: &Path) -> Result<(), DspError> {
    let (nz, nx) = img.values_db.dim();
    let io = |e| DspError::Format(FormatError::io(path, e));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    write!(w, "P5\n{nx} {nz}\n255\n").map_err(io)?;
    let raster: Vec<u8> = img.values_db.iter().map(|&v| gray_level(v, img.dynamic_range_db)).collect();
    w.write_all(&raster).map_err(io)?;
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Reads an 8-bit `P5` file.
pub fn read_pgm(path: &Path) -> Result<Graymap, FormatError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| FormatError::io(path, e))?;
    let bad = |m: &str| FormatError::malformed(path, m);
    let mut pos = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(bad("not a P5 graymap"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(bad("only 8-bit graymaps are supported"));
    }
    let pixels = bytes.get(pos + 1..).unwrap_or_default().to_vec();
    if pixels.len() != width * height {
        return Err(bad("raster size does not match header"));
    }
    Ok(Graymap { width, height, pixels })
}

/// Writes beamformed data as `URBF`: magic, `u32` version, `u32` nx,
/// `u32` nz, `f64` pixel pitch, then `f32` samples row by row.
pub fn write_urbf(data: &Array2<f64>, pixel_pitch: f64, path: &Path) -> Result<(), FormatError> {
    let (nz, nx) = data.dim();
    let io = |e| FormatError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(URBF_MAGIC).map_err(io)?;
    for v in [URBF_VERSION, nx as u32, nz as u32] {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.write_all(&pixel_pitch.to_le_bytes()).map_err(io)?;
    for &v in data.iter() {
        w.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Returns the data and pixel pitch.
pub fn read_urbf(path: &Path) -> Result<(Array2<f64>, f64), FormatError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| FormatError::io(path, e))?;
    if bytes.len() < 24 || &bytes[..4] != URBF_MAGIC {
        return Err(FormatError::malformed(path, "not a URBF file"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if word(4) != URBF_VERSION {
        return Err(FormatError::malformed(path, format!("unsupported version {}", word(4))));
    }
    let (nx, nz) = (word(8) as usize, word(12) as usize);
    let pitch = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let body = &bytes[24..];
    if body.len() != nx * nz * 4 {
        return Err(FormatError::malformed(path, "data size does not match header"));
    }
    let values = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let data = Array2::from_shape_vec((nz, nx), values).map_err(|e| FormatError::malformed(path, e.to_string()))?;
    Ok((data, pitch))
}
