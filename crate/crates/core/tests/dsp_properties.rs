mod common;

use proptest::prelude::*;
use sonotrace::dsp::{self, BeamformGrid};
use sonotrace::{ChannelData, PlaneWaveScheme, Vec3};

use common::*;

proptest! {
    #[test]
    fn convolution_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, 64),
        b in prop::collection::vec(-1.0f64..1.0, 64),
        ka in -3.0f64..3.0,
        kb in -3.0f64..3.0,
    ) {
        let kernel = pulse().kernel;
        let conv = |x: &[f64]| {
            let mut out = vec![0.0; x.len()];
            dsp::convolve_same(x, &kernel, &mut out);
            out
        };
        let mixed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| ka * x + kb * y).collect();
        let (ca, cb, cm) = (conv(&a), conv(&b), conv(&mixed));
        for i in 0..64 {
            prop_assert!((cm[i] - (ka * ca[i] + kb * cb[i])).abs() <= 1e-6);
        }
    }

    #[test]
    fn convolution_commutes_with_shifts(
        x in prop::collection::vec(-1.0f64..1.0, 40),
        shift in 0usize..20,
    ) {
        let kernel = pulse().kernel;
        let n = 40 + 2 * kernel.len() + 20;
        let pad = kernel.len();
        let mut base = vec![0.0; n];
        let mut moved = vec![0.0; n];
        base[pad..pad + 40].copy_from_slice(&x);
        moved[pad + shift..pad + shift + 40].copy_from_slice(&x);
        let (mut cb, mut cm) = (vec![0.0; n], vec![0.0; n]);
        dsp::convolve_same(&base, &kernel, &mut cb);
        dsp::convolve_same(&moved, &kernel, &mut cm);
        for i in 0..n - shift {
            prop_assert!((cm[i + shift] - cb[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn log_compression_is_monotone(values in prop::collection::vec(0.0f64..10.0, 2..50)) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let env = ndarray::Array2::from_shape_vec((1, values.len()), values.clone()).unwrap();
        let grid = BeamformGrid::new(0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let img = dsp::log_compress(&env, 90.0, grid).unwrap();
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] >= values[j] {
                    prop_assert!(img.values_db[[0, i]] >= img.values_db[[0, j]]);
                }
            }
            prop_assert!((-90.0..=0.0).contains(&img.values_db[[0, i]]));
        }
    }
}

#[test]
fn pulse_envelope_matches_gaussian() {
    let p = pulse();
    let mut column = vec![0.0; 512];
    let center = 256;
    for (k, &w) in p.kernel.iter().enumerate() {
        column[center + k - p.half_len] = w;
    }
    let env = dsp::envelope_1d(&column);
    let peak = env.iter().copied().fold(0.0, f64::max);
    assert!((peak - 1.0).abs() <= 0.03, "envelope peak {peak}");
    for k in 0..column.len() {
        let t = (k as f64 - center as f64) / FS;
        assert!((env[k] - p.envelope_at(t)).abs() <= 0.03, "sample {k}");
        assert!(env[k] + 0.02 >= column[k].abs());
    }
}

#[test]
fn off_axis_point_target_is_located() {
    let spec = linear_probe(64);
    let scheme = PlaneWaveScheme::linspace(-0.2, 0.2, 5).unwrap();
    let target = Vec3::new(0.004, 0.0, 0.025);
    let p = pulse();
    let mut rf = ChannelData::zeros(scheme.len(), spec.num_elements, 3000, FS);
    for (ev, &angle) in scheme.angles().iter().enumerate() {
        let tx = sonotrace::transducer::plane_wave_delay(&spec, angle, target, C);
        for g in spec.elements() {
            let arrival = tx + (target - g.center).length() / C;
            for k in 0..3000 {
                rf.samples[[ev, g.index, k]] = p.eval(k as f64 / FS - arrival);
            }
        }
    }
    let grid = BeamformGrid::new(0.002, 0.006, 0.023, 0.027, 4e-5).unwrap();
    let bf = dsp::das_beamform(&rf, &spec, &scheme, &grid, C).unwrap();
    let env = dsp::envelope(&bf.data);
    let ((j, i), _) = env
        .indexed_iter()
        .fold(((0, 0), f64::NEG_INFINITY), |best, (ix, &v)| if v > best.1 { (ix, v) } else { best });
    let wavelength = C / FC;
    let dz = (grid.z(j) - target.z).abs();
    assert!(dz <= grid.pixel_pitch && dz <= wavelength / 2.0, "axial error {dz}");
    assert!((grid.x(i) - target.x).abs() <= grid.pixel_pitch, "lateral error");
}

#[test]
fn urbf_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bf.urbf");
    let data = ndarray::Array2::from_shape_fn((7, 5), |(j, i)| (j as f32 * 0.5 - i as f32 * 1.25) as f64);
    dsp::write_urbf(&data, 1e-4, &path).unwrap();
    let (back, pitch) = dsp::read_urbf(&path).unwrap();
    assert_eq!(back, data);
    assert_eq!(pitch, 1e-4);
    let raw = std::fs::read(&path).unwrap();
    assert_eq!(&raw[..4], b"URBF");
    assert_eq!(u32::from_le_bytes(raw[8..12].try_into().unwrap()), 5);
    assert_eq!(u32::from_le_bytes(raw[12..16].try_into().unwrap()), 7);
}
