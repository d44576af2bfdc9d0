use rayon::prelude::*;

use super::DspError;
use crate::channel::ChannelData;

/// Gaussian-windowed sine: `s(t) = sin(2π fc t) · exp(−t²/σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub fc: f64,
    pub cycles: f64,
    /// Envelope parameter, s². The envelope is one half at `t = ±cycles/(2 fc)`.
    pub sigma: f64,
    pub fs: f64,
    /// Samples at `t = (k − half_len) / fs`, `k = 0..2·half_len+1`.
    pub kernel: Vec<f64>,
    pub half_len: usize,
}

/// Envelope level at which the kernel is cut.
const SUPPORT_LEVEL: f64 = 1e-3;

impl Pulse {
    pub fn envelope_at(&self, t: f64) -> f64 {
        (-t * t / self.sigma).exp()
    }

    pub fn eval(&self, t: f64) -> f64 {
        (2.0 * std::f64::consts::PI * self.fc * t).sin() * self.envelope_at(t)
    }

    /// Half-width of the support, s.
    pub fn t_max(&self) -> f64 {
        (self.sigma * (1.0 / SUPPORT_LEVEL).ln()).sqrt()
    }
}

pub fn pulse_kernel(fc: f64, cycles: f64, fs: f64) -> Result<Pulse, DspError> {
    if !(fc > 0.0 && fc.is_finite()) {
        return Err(DspError::InvalidPulse(format!("center frequency must be > 0, got {fc}")));
    }
    if !(cycles >= 1.0 && cycles.is_finite()) {
        return Err(DspError::InvalidPulse(format!("cycles must be >= 1, got {cycles}")));
    }
    if !(fs > 2.0 * fc && fs.is_finite()) {
        return Err(DspError::Nyquist { fs, fc });
    }
    let half_width = cycles / (2.0 * fc);
    let sigma = half_width * half_width / std::f64::consts::LN_2;
    let mut pulse = Pulse {
        fc,
        cycles,
        sigma,
        fs,
        kernel: Vec::new(),
        half_len: 0,
    };
    pulse.half_len = (pulse.t_max() * fs).ceil() as usize;
    let h = pulse.half_len as i64;
    // Odd symmetry is enforced exactly rather than left to rounding.
    let positive: Vec<f64> = (1..=h).map(|k| pulse.eval(k as f64 / fs)).collect();
    pulse.kernel = positive
        .iter()
        .rev()
        .map(|v| -v)
        .chain(std::iter::once(0.0))
        .chain(positive.iter().copied())
        .collect();
    Ok(pulse)
}

/// Linear convolution cropped to the input length, kernel center aligned to
/// the input sample.
pub fn convolve_same(signal: &[f64], kernel: &[f64], out: &mut [f64]) {
    let half = (kernel.len() / 2) as isize;
    let n = signal.len() as isize;
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, &x) in signal.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (k, &w) in kernel.iter().enumerate() {
            let j = i as isize + k as isize - half;
            if (0..n).contains(&j) {
                out[j as usize] += x * w;
            }
        }
    }
}

/// Convolves every (event, element) trace with the pulse.
pub fn convolve_channels(channel: &ChannelData, pulse: &Pulse) -> Result<ChannelData, DspError> {
    if channel.fs != pulse.fs {
        return Err(DspError::SamplingMismatch {
            channel: channel.fs,
            pulse: pulse.fs,
        });
    }
    let mut out = ChannelData::zeros(channel.num_events(), channel.num_elements(), channel.num_samples(), channel.fs);
    let n = channel.num_samples().max(1);
    let src = channel.samples.as_standard_layout();
    let src = src.as_slice().expect("standard layout");
    let dst = out.samples.as_slice_mut().expect("fresh array is contiguous");
    dst.par_chunks_mut(n).zip(src.par_chunks(n)).for_each(|(d, s)| convolve_same(s, &pulse.kernel, d));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_amplitude_at_half_duration() {
        let p = pulse_kernel(5e6, 5.0, 50e6).unwrap();
        assert!((p.envelope_at(0.5e-6) - 0.5).abs() < 1e-12);
        assert!((p.envelope_at(-0.5e-6) - 0.5).abs() < 1e-12);
        assert_eq!(p.eval(0.0), 0.0);
    }

    #[test]
    fn kernel_is_odd_and_covers_support() {
        let p = pulse_kernel(5e6, 5.0, 50e6).unwrap();
        let k = &p.kernel;
        assert_eq!(k.len(), 2 * p.half_len + 1);
        assert_eq!(k[p.half_len], 0.0);
        for i in 0..k.len() {
            assert_eq!(k[i], -k[k.len() - 1 - i]);
        }
        assert!(p.envelope_at(p.half_len as f64 / p.fs) <= SUPPORT_LEVEL * (1.0 + 1e-12));
        assert!(p.envelope_at((p.half_len - 1) as f64 / p.fs) > SUPPORT_LEVEL);
    }

    #[test]
    fn rejects_undersampling() {
        assert!(matches!(pulse_kernel(5e6, 5.0, 10e6), Err(DspError::Nyquist { .. })));
        assert!(pulse_kernel(5e6, 0.5, 50e6).is_err());
    }

    #[test]
    fn impulse_reproduces_kernel() {
        let p = pulse_kernel(5e6, 3.0, 50e6).unwrap();
        let mut ch = ChannelData::zeros(1, 2, 400, 50e6);
        ch.samples[[0, 1, 200]] = 1.0;
        let out = convolve_channels(&ch, &p).unwrap();
        for (k, &w) in p.kernel.iter().enumerate() {
            assert_eq!(out.samples[[0, 1, 200 + k - p.half_len]], w);
        }
        assert!(out.samples.slice(ndarray::s![0, 0, ..]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fs_mismatch() {
        let p = pulse_kernel(5e6, 3.0, 50e6).unwrap();
        assert!(convolve_channels(&ChannelData::zeros(1, 1, 8, 40e6), &p).is_err());
    }
}
