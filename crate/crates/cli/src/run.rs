//! Load, trace, convolve, beamform, detect, compress and export.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sonotrace::dsp::{self, BeamformGrid};
use sonotrace::scene::{load_meshes, MeshFormat};
use sonotrace::{trace, Accelerator, Material, PlaneWaveScheme, Scene, SecondaryMode, TraceConfig, TraceStats, TransducerSpec};
use thiserror::Error;

use crate::config::{Layout, SecondaryModeConfig, SimConfig};

/// File names used inside the output directory.
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const STATS_JSON: &str = "stats.json";
pub const DUMP_RF: &str = "rf.urrf";

#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct RunError {
    pub stage: &'static str,
    pub message: String,
}

fn fail<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> RunError {
    move |e| RunError {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    /// Write the raw traced channel data even if the config has no rf path.
    pub dump_rf: bool,
    pub stats_json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub trace: TraceStats,
    pub timings: Vec<StageTiming>,
    pub triangles: usize,
    pub events: usize,
    pub elements: usize,
    pub samples: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub out_of_range_pixels: usize,
    pub threads: usize,
    pub outputs: Vec<PathBuf>,
}

struct Clock {
    timings: Vec<StageTiming>,
    last: Instant,
}

impl Clock {
    fn new() -> Clock {
        Clock {
            timings: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage,
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

/// Builds the scene described by `cfg`, assigning each mesh its material.
pub fn build_scene(cfg: &SimConfig) -> Result<Scene, RunError> {
    let materials = cfg
        .materials
        .iter()
        .map(|(name, m)| Material::new(name.clone(), m.impedance, m.roughness))
        .collect::<Result<Vec<_>, _>>()
        .map_err(fail("load"))?;
    let mut scene = Scene::new(materials, &cfg.background, cfg.speed_of_sound).map_err(fail("load"))?;
    let meshes = load_meshes(&cfg.scene_file, MeshFormat::Obj).map_err(fail("load"))?;
    if meshes.is_empty() {
        return Err(fail("load")(format!("{}: no faces", cfg.scene_file.display())));
    }
    for name in cfg.mesh_materials.keys() {
        if !meshes.iter().any(|m| &m.name == name) {
            return Err(fail("load")(format!("scene.meshes.{name}: no mesh of that name in {}", cfg.scene_file.display())));
        }
    }
    for mesh in meshes {
        let material = match cfg.mesh_materials.get(&mesh.name).or(cfg.default_material.as_ref()) {
            Some(m) => m.clone(),
            None => {
                return Err(fail("load")(format!(
                    "mesh '{}' has no material; set scene.meshes.{} or scene.default_material",
                    mesh.name, mesh.name
                )))
            }
        };
        scene.add_mesh(mesh, &material).map_err(fail("load"))?;
    }
    Ok(scene)
}

pub fn build_transducer(cfg: &SimConfig) -> Result<TransducerSpec, RunError> {
    let t = &cfg.transducer;
    let (alpha_m, alpha_c) = (t.main_beam_angle_deg.to_radians(), t.cutoff_angle_deg.to_radians());
    match t.layout {
        Layout::Convex {
            radius,
            opening_angle_deg,
        } => TransducerSpec::convex(
            t.elements,
            radius,
            opening_angle_deg.to_radians(),
            t.elevational_extent,
            t.center_frequency,
            alpha_m,
            alpha_c,
        ),
        Layout::Linear { pitch } => TransducerSpec::linear_equivalent(
            t.elements,
            pitch,
            t.elevational_extent,
            t.center_frequency,
            alpha_m,
            alpha_c,
        ),
    }
    .map_err(fail("transducer"))
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Runs the full pipeline and writes every requested output.
pub fn run(cfg: &SimConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    let mut clock = Clock::new();
    let dir = &opts.output_dir;
    std::fs::create_dir_all(dir).map_err(fail("output"))?;
    let mut outputs = Vec::new();
    let echo = dir.join(RESOLVED_CONFIG);
    std::fs::write(&echo, cfg.to_toml()).map_err(fail("output"))?;
    outputs.push(echo);

    let scene = build_scene(cfg)?;
    let spec = build_transducer(cfg)?;
    let angles = cfg.angles_deg.iter().map(|a| a.to_radians()).collect();
    let scheme = PlaneWaveScheme::new(angles).map_err(fail("transducer"))?;
    let pulse = dsp::pulse_kernel(cfg.transducer.center_frequency, cfg.cycles, cfg.sampling_frequency).map_err(fail("pulse"))?;
    clock.lap("load");

    let accel = Accelerator::build(&scene);
    clock.lap("build");

    let num_samples = cfg.num_samples.unwrap_or_else(|| {
        TraceConfig::default_num_samples(cfg.max_path_length, cfg.speed_of_sound, cfg.sampling_frequency, pulse.kernel.len())
    });
    let trace_cfg = TraceConfig {
        rays_per_element: cfg.rays_per_element,
        max_bounces: cfg.max_bounces,
        max_path_length: cfg.max_path_length,
        seed: cfg.seed,
        sampling_frequency: cfg.sampling_frequency,
        num_samples,
        secondary_mode: match cfg.secondary_mode {
            SecondaryModeConfig::Binary => SecondaryMode::Binary,
            SecondaryModeConfig::Transmissive => SecondaryMode::Transmissive,
        },
        max_secondary_interactions: cfg.max_secondary_interactions,
    };
    let (rf, stats) = trace(&scene, &accel, &spec, &scheme, &trace_cfg).map_err(fail("trace"))?;
    clock.lap("trace");

    let mut rf_paths: Vec<PathBuf> = cfg.rf.iter().map(|p| resolve(dir, p)).collect();
    if opts.dump_rf && rf_paths.is_empty() {
        rf_paths.push(dir.join(DUMP_RF));
    }
    for path in rf_paths {
        rf.write_urrf(&path).map_err(fail("output"))?;
        outputs.push(path);
    }

    let rf = dsp::convolve_channels(&rf, &pulse).map_err(fail("convolve"))?;
    clock.lap("convolve");

    let [x_min, x_max, z_min, z_max, pitch] = cfg.grid;
    let grid = BeamformGrid::new(x_min, x_max, z_min, z_max, pitch).map_err(fail("beamform"))?;
    let bf = dsp::das_beamform(&rf, &spec, &scheme, &grid, cfg.speed_of_sound).map_err(fail("beamform"))?;
    clock.lap("beamform");
    if let Some(p) = &cfg.beamformed {
        let path = resolve(dir, p);
        dsp::write_urbf(&bf.data, pitch, &path).map_err(fail("output"))?;
        outputs.push(path);
    }

    let env = dsp::envelope(&bf.data);
    clock.lap("envelope");
    let img = dsp::log_compress(&env, cfg.dynamic_range_db, grid).map_err(fail("log compress"))?;
    clock.lap("log compress");
    let image = resolve(dir, &cfg.image);
    dsp::export_image(&img, &image).map_err(fail("export"))?;
    outputs.push(image);
    clock.lap("export");

    let mut report = RunReport {
        trace: stats,
        timings: clock.timings,
        triangles: scene.triangle_count(),
        events: rf.num_events(),
        elements: rf.num_elements(),
        samples: rf.num_samples(),
        image_width: grid.nx(),
        image_height: grid.nz(),
        out_of_range_pixels: bf.out_of_range,
        threads: rayon::current_num_threads(),
        outputs,
    };
    if opts.stats_json {
        let path = dir.join(STATS_JSON);
        report.outputs.push(path.clone());
        let json = serde_json::to_string_pretty(&report).map_err(fail("output"))?;
        std::fs::write(&path, json + "\n").map_err(fail("output"))?;
    }
    Ok(report)
}
