use ndarray::Array2;
use rayon::prelude::*;

use super::DspError;
use crate::channel::ChannelData;
use crate::math::Vec3;
use crate::transducer::{min_aperture_projection, PlaneWaveScheme, TransducerSpec};

/// Cartesian pixel grid in the imaging plane. `x` runs along the array's
/// lateral direction and `z` along its axis, both relative to the array
/// center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamformGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub pixel_pitch: f64,
}

impl BeamformGrid {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64, pixel_pitch: f64) -> Result<BeamformGrid, DspError> {
        let g = BeamformGrid {
            x_min,
            x_max,
            z_min,
            z_max,
            pixel_pitch,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), DspError> {
        let finite = [self.x_min, self.x_max, self.z_min, self.z_max, self.pixel_pitch]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(DspError::InvalidGrid("non-finite value".into()));
        }
        if !(self.pixel_pitch > 0.0) {
            return Err(DspError::InvalidGrid(format!("pixel pitch must be > 0, got {}", self.pixel_pitch)));
        }
        if !(self.x_max > self.x_min && self.z_max > self.z_min) {
            return Err(DspError::InvalidGrid("extents must be positive".into()));
        }
        Ok(())
    }

    fn count(span: f64, pitch: f64) -> usize {
        (span / pitch + 1e-9).floor() as usize + 1
    }

    pub fn nx(&self) -> usize {
        Self::count(self.x_max - self.x_min, self.pixel_pitch)
    }

    pub fn nz(&self) -> usize {
        Self::count(self.z_max - self.z_min, self.pixel_pitch)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.pixel_pitch
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z_min + j as f64 * self.pixel_pitch
    }

    /// Row index of the pixel nearest to depth `z`.
    pub fn row_of(&self, z: f64) -> f64 {
        (z - self.z_min) / self.pixel_pitch
    }
}

/// Coherently compounded delay-and-sum output, `data[[row (z), column (x)]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformed {
    pub data: Array2<f64>,
    /// Pixels with at least one delay outside the sampled time range; those
    /// pixels are set to zero.
    pub out_of_range: usize,
}

/// Plane-wave delay-and-sum with coherent compounding over all events and
/// no apodization.
pub fn das_beamform(
    rf: &ChannelData,
    spec: &TransducerSpec,
    scheme: &PlaneWaveScheme,
    grid: &BeamformGrid,
    c: f64,
) -> Result<Beamformed, DspError> {
    grid.validate()?;
    if rf.num_events() != scheme.len() {
        return Err(DspError::ShapeMismatch {
            what: "events",
            found: rf.num_events(),
            expected: scheme.len(),
        });
    }
    if rf.num_elements() != spec.num_elements {
        return Err(DspError::ShapeMismatch {
            what: "elements",
            found: rf.num_elements(),
            expected: spec.num_elements,
        });
    }
    let elements: Vec<Vec3> = spec.elements().iter().map(|g| g.center).collect();
    let steering: Vec<(Vec3, f64)> = scheme
        .angles()
        .iter()
        .map(|&a| (spec.steering_direction(a), min_aperture_projection(spec, a)))
        .collect();
    let (nx, nz) = (grid.nx(), grid.nz());
    let ns = rf.num_samples();
    let last = ns as f64 - 1.0;
    let fs = rf.fs;
    let contiguous = rf.samples.as_standard_layout();
    let samples = contiguous.as_slice().expect("standard layout");

    // Per row, loop lanes outermost so each lane is read sequentially
    // across the row instead of jumping between lanes for every pixel.
    let ne = elements.len();
    let rows: Vec<(Vec<f64>, usize)> = (0..nz)
        .into_par_iter()
        .map(|j| {
            let points: Vec<Vec3> = (0..nx)
                .map(|i| spec.center + spec.lateral * grid.x(i) + spec.axis * grid.z(j))
                .collect();
            let mut rx = vec![0.0; ne * nx];
            for (e, lane) in elements.iter().zip(rx.chunks_exact_mut(nx)) {
                for (r, p) in lane.iter_mut().zip(&points) {
                    *r = (*p - *e).length() / c;
                }
            }
            let mut row = vec![0.0; nx];
            let mut ok = vec![true; nx];
            let mut tx = vec![0.0; nx];
            for (ev, &(k, m)) in steering.iter().enumerate() {
                for (t, p) in tx.iter_mut().zip(&points) {
                    *t = (p.dot(k) - m) / c;
                }
                for el in 0..ne {
                    let lane = &samples[(ev * ne + el) * ns..][..ns];
                    let rx = &rx[el * nx..][..nx];
                    for i in 0..nx {
                        let s = (tx[i] + rx[i]) * fs;
                        if !(s >= 0.0 && s <= last) {
                            ok[i] = false;
                            continue;
                        }
                        let i0 = s.floor() as usize;
                        let f = s - i0 as f64;
                        let a = lane[i0];
                        row[i] += if f > 0.0 { a + (lane[i0 + 1] - a) * f } else { a };
                    }
                }
            }
            let mut bad = 0;
            for (v, &good) in row.iter_mut().zip(&ok) {
                if !good {
                    *v = 0.0;
                    bad += 1;
                }
            }
            (row, bad)
        })
        .collect();

    let mut data = Array2::zeros((nz, nx));
    let mut out_of_range = 0;
    for (j, (row, bad)) in rows.into_iter().enumerate() {
        data.row_mut(j).iter_mut().zip(row).for_each(|(d, v)| *d = v);
        out_of_range += bad;
    }
    Ok(Beamformed { data, out_of_range })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> TransducerSpec {
        TransducerSpec::linear_equivalent(16, 3e-4, 0.004, 5e6, 0.1, 0.1).unwrap()
    }

    #[test]
    fn grid_counts_include_endpoints() {
        let g = BeamformGrid::new(-0.01, 0.01, 0.0, 0.03, 1e-4).unwrap();
        assert_eq!(g.nx(), 201);
        assert_eq!(g.nz(), 301);
        assert!((g.x(200) - 0.01).abs() < 1e-15);
        assert!(BeamformGrid::new(0.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(BeamformGrid::new(1.0, 0.0, 0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn zero_rf_gives_zero_image() {
        let spec = probe();
        let scheme = PlaneWaveScheme::linspace(-0.1, 0.1, 3).unwrap();
        let rf = ChannelData::zeros(3, 16, 4000, 50e6);
        let g = BeamformGrid::new(-0.002, 0.002, 0.01, 0.02, 2e-4).unwrap();
        let out = das_beamform(&rf, &spec, &scheme, &g, 1540.0).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
        assert_eq!(out.out_of_range, 0);
    }

    #[test]
    fn short_record_counts_pixels() {
        let spec = probe();
        let rf = ChannelData::zeros(1, 16, 100, 50e6);
        let g = BeamformGrid::new(-0.001, 0.001, 0.01, 0.02, 1e-3).unwrap();
        let out = das_beamform(&rf, &spec, &PlaneWaveScheme::broadside(), &g, 1540.0).unwrap();
        assert_eq!(out.out_of_range, g.nx() * g.nz());
    }

    #[test]
    fn shape_checks() {
        let spec = probe();
        let g = BeamformGrid::new(-0.001, 0.001, 0.01, 0.02, 1e-3).unwrap();
        let rf = ChannelData::zeros(2, 16, 100, 50e6);
        assert!(das_beamform(&rf, &spec, &PlaneWaveScheme::broadside(), &g, 1540.0).is_err());
        let rf = ChannelData::zeros(1, 15, 100, 50e6);
        assert!(das_beamform(&rf, &spec, &PlaneWaveScheme::broadside(), &g, 1540.0).is_err());
    }
}
