//! Per-event, per-element time signals and their `URRF` binary dump.
//!
//! Layout: `URRF` magic, then little-endian `u32` version (1), `u32`
//! events, `u32` elements, `u32` samples, `f64` sampling frequency, and the
//! samples as `f32` in `[event][element][sample]` order.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;
use thiserror::Error;

pub const URRF_MAGIC: &[u8; 4] = b"URRF";
pub const URRF_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: io::Error) -> FormatError {
        FormatError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn malformed(path: &Path, message: impl Into<String>) -> FormatError {
        FormatError::Malformed {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}

/// Received pressure, `samples[[event, element, sample]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelData {
    pub samples: Array3<f64>,
    /// Sampling frequency, Hz.
    pub fs: f64,
}

/// Result of a single [`splat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplatOutcome {
    Stored,
    /// Some or all of the amplitude fell past the end of the buffer.
    Truncated,
}

impl ChannelData {
    pub fn zeros(events: usize, elements: usize, samples: usize, fs: f64) -> ChannelData {
        ChannelData {
            samples: Array3::zeros((events, elements, samples)),
            fs,
        }
    }

    pub fn num_events(&self) -> usize {
        self.samples.dim().0
    }

    pub fn num_elements(&self) -> usize {
        self.samples.dim().1
    }

    pub fn num_samples(&self) -> usize {
        self.samples.dim().2
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub fn write_urrf(&self, path: &Path) -> Result<(), FormatError> {
        let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode(&mut w).map_err(|e| FormatError::io(path, e))?;
        w.flush().map_err(|e| FormatError::io(path, e))
    }

    pub fn encode<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let (e, n, s) = self.samples.dim();
        w.write_all(URRF_MAGIC)?;
        for v in [URRF_VERSION, e as u32, n as u32, s as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.fs.to_le_bytes())?;
        for &v in self.samples.iter() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_urrf(path: &Path) -> Result<ChannelData, FormatError> {
        let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| FormatError::io(path, e))?;
        if &magic != URRF_MAGIC {
            return Err(FormatError::malformed(path, "not a URRF file"));
        }
        let mut word = [0u8; 4];
        let mut header = [0u32; 4];
        for slot in header.iter_mut() {
            r.read_exact(&mut word).map_err(|e| FormatError::io(path, e))?;
            *slot = u32::from_le_bytes(word);
        }
        let [version, e, n, s] = header;
        if version != URRF_VERSION {
            return Err(FormatError::malformed(path, format!("unsupported version {version}")));
        }
        let mut fs = [0u8; 8];
        r.read_exact(&mut fs).map_err(|e| FormatError::io(path, e))?;
        let fs = f64::from_le_bytes(fs);
        let count = e as usize * n as usize * s as usize;
        let mut raw = vec![0u8; count * 4];
        r.read_exact(&mut raw).map_err(|e| FormatError::io(path, e))?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| FormatError::io(path, e))? != 0 {
            return Err(FormatError::malformed(path, "trailing bytes after sample data"));
        }
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        let samples = Array3::from_shape_vec((e as usize, n as usize, s as usize), values)
            .map_err(|err| FormatError::malformed(path, err.to_string()))?;
        Ok(ChannelData { samples, fs })
    }
}

/// Adds `amplitude` at `time` (s) by linear interpolation between the two
/// neighbouring samples. Anything past the last sample is dropped.
pub fn splat(channel: &mut ChannelData, event: usize, element: usize, time: f64, amplitude: f64) -> SplatOutcome {
    let n = channel.num_samples();
    let s = time * channel.fs;
    if !(s >= 0.0) || s >= n as f64 {
        return SplatOutcome::Truncated;
    }
    let i = s.floor() as usize;
    let f = s - i as f64;
    let mut lane = channel.samples.slice_mut(ndarray::s![event, element, ..]);
    lane[i] += amplitude * (1.0 - f);
    if f > 0.0 {
        if i + 1 < n {
            lane[i + 1] += amplitude * f;
        } else {
            return SplatOutcome::Truncated;
        }
    }
    SplatOutcome::Stored
}
