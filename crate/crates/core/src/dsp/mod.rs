//! Channel data to B-mode: pulse convolution, plane-wave delay-and-sum,
//! envelope detection, log compression and image export.

mod beamform;
mod envelope;
mod image;
mod pulse;

use thiserror::Error;

pub use beamform::{das_beamform, Beamformed, BeamformGrid};
pub use envelope::{analytic_signal, envelope, envelope_1d};
pub use image::{export_image, gray_level, log_compress, read_pgm, read_urbf, write_urbf, BModeImage, Graymap};
pub use pulse::{convolve_channels, convolve_same, pulse_kernel, Pulse};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("sampling frequency {fs} Hz does not exceed twice the center frequency {fc} Hz")]
    Nyquist { fs: f64, fc: f64 },
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("sampling frequency mismatch: channel {channel} Hz, pulse {pulse} Hz")]
    SamplingMismatch { channel: f64, pulse: f64 },
    #[error("invalid beamforming grid: {0}")]
    InvalidGrid(String),
    #[error("channel data has {found} {what}, expected {expected}")]
    ShapeMismatch { what: &'static str, found: usize, expected: usize },
    #[error("envelope is zero everywhere")]
    AllZero,
    #[error("invalid dynamic range {0} dB")]
    InvalidDynamicRange(f64),
    #[error(transparent)]
    Format(#[from] crate::channel::FormatError),
}
