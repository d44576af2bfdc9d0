#![allow(dead_code)]

use sonotrace::dsp::{self, BeamformGrid, Pulse};
use sonotrace::scene::shapes;
use sonotrace::{Accelerator, ChannelData, Material, PlaneWaveScheme, Scene, SecondaryMode, TraceConfig, TransducerSpec, Vec3};

pub const C: f64 = 1540.0;
pub const FS: f64 = 50e6;
pub const FC: f64 = 5e6;

pub fn materials() -> Vec<Material> {
    vec![
        Material::new("water", 1.54, 0.5).unwrap(),
        Material::new("bone", 7.8, 0.5).unwrap(),
    ]
}

/// Flat array with 0.3 mm pitch and a 2° receive main beam.
pub fn linear_probe(elements: usize) -> TransducerSpec {
    TransducerSpec::linear_equivalent(elements, 3e-4, 0.004, FC, 2f64.to_radians(), 2f64.to_radians()).unwrap()
}

pub fn empty_scene() -> Scene {
    Scene::new(materials(), "water", C).unwrap()
}

/// Plate facing the array at `depth`, `width` along x and 50 mm along y.
pub fn add_plate(scene: &mut Scene, name: &str, depth: f64, x_center: f64, width: f64, height: f64) {
    let plate = shapes::sheet(name, Vec3::new(x_center, 0.0, depth), -Vec3::Z, Vec3::X, width, height);
    scene.add_mesh(plate, "bone").unwrap();
}

pub fn flat_plate(depth: f64) -> Scene {
    let mut scene = empty_scene();
    add_plate(&mut scene, "plate", depth, 0.0, 0.1, 0.05);
    scene
}

pub fn config(rays_per_element: usize, seed: u64, num_samples: usize, mode: SecondaryMode) -> TraceConfig {
    TraceConfig {
        rays_per_element,
        max_bounces: 10,
        max_path_length: 0.2,
        seed,
        sampling_frequency: FS,
        num_samples,
        secondary_mode: mode,
        max_secondary_interactions: 10,
    }
}

pub fn pulse() -> Pulse {
    dsp::pulse_kernel(FC, 5.0, FS).unwrap()
}

pub fn default_samples() -> usize {
    TraceConfig::default_num_samples(0.2, C, FS, pulse().kernel.len())
}

/// Full image chain, returns the beamformed data and the image in dB.
pub fn image(
    rf: &ChannelData,
    spec: &TransducerSpec,
    scheme: &PlaneWaveScheme,
    grid: &BeamformGrid,
    dynamic_range: f64,
) -> (ndarray::Array2<f64>, dsp::BModeImage) {
    let rf = dsp::convolve_channels(rf, &pulse()).unwrap();
    let bf = dsp::das_beamform(&rf, spec, scheme, grid, C).unwrap();
    let env = dsp::envelope(&bf.data);
    let img = dsp::log_compress(&env, dynamic_range, *grid).unwrap();
    (bf.data, img)
}

pub fn build(scene: &Scene) -> Accelerator {
    Accelerator::build(scene)
}
