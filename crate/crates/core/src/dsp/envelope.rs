use ndarray::{Array2, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Discrete analytic signal: keep DC (and Nyquist for even lengths), double
/// the positive frequencies, zero the negative ones.
pub fn analytic_signal(signal: &[f64]) -> Vec<Complex<f64>> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    forward.process(&mut buf);
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *v *= gain / n as f64;
    }
    inverse.process(&mut buf);
    buf
}

pub fn envelope_1d(signal: &[f64]) -> Vec<f64> {
    analytic_signal(signal).iter().map(|c| c.norm()).collect()
}

/// Analytic-signal magnitude of every depth column (axis 0).
pub fn envelope(beamformed: &Array2<f64>) -> Array2<f64> {
    let columns: Vec<Vec<f64>> = (0..beamformed.ncols())
        .into_par_iter()
        .map(|i| envelope_1d(&beamformed.column(i).to_vec()))
        .collect();
    let mut out = Array2::zeros(beamformed.dim());
    for (mut dst, col) in out.axis_iter_mut(Axis(1)).zip(columns) {
        dst.iter_mut().zip(col).for_each(|(d, v)| *d = v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn tone_has_flat_envelope() {
        // Whole number of periods so the tone is exactly periodic.
        let n = 1000;
        let x: Vec<f64> = (0..n).map(|i| 3.0 * (2.0 * PI * 50.0 * i as f64 / n as f64).sin()).collect();
        for v in envelope_1d(&x) {
            assert!((v - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn real_part_is_preserved() {
        for n in [7usize, 8, 64, 101] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
            let a = analytic_signal(&x);
            for (c, &v) in a.iter().zip(&x) {
                assert!((c.re - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zeros_stay_zero() {
        let e = envelope(&Array2::zeros((16, 3)));
        assert!(e.iter().all(|&v| v == 0.0));
        assert!(envelope_1d(&[]).is_empty());
    }
}
