//! Simulation config file: TOML with the sections `scene`, `materials`,
//! `transducer`, `acquisition`, `trace` and `output`. Unknown keys are
//! errors. Everything except `scene.file` and at least one material has a
//! default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SPEED_OF_SOUND: f64 = 1540.0;
pub const DEFAULT_SAMPLING_FREQUENCY: f64 = 50e6;
pub const DEFAULT_CYCLES: f64 = 5.0;
pub const DEFAULT_DYNAMIC_RANGE: f64 = 90.0;
pub const DEFAULT_MAX_BOUNCES: u32 = 10;
pub const DEFAULT_MAX_PATH_LENGTH: f64 = 0.2;
pub const DEFAULT_RAYS_PER_ELEMENT: usize = 100_000;
pub const DEFAULT_ROUGHNESS: f64 = 0.5;
/// Name of the built-in ambient medium, added when not declared.
pub const WATER: &str = "water";
pub const WATER_IMPEDANCE: f64 = 1.54;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

// File layout. Every field is optional here so that defaults can be
// applied, and the same structs serialize the resolved config.

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scene: Option<RawScene>,
    #[serde(default)]
    materials: BTreeMap<String, RawMaterial>,
    transducer: Option<RawTransducer>,
    acquisition: Option<RawAcquisition>,
    trace: Option<RawTrace>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    file: Option<PathBuf>,
    background: Option<String>,
    default_material: Option<String>,
    meshes: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    impedance: Option<f64>,
    roughness: Option<f64>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawTransducer {
    elements: Option<usize>,
    radius: Option<f64>,
    opening_angle: Option<f64>,
    pitch: Option<f64>,
    elevational_extent: Option<f64>,
    center_frequency: Option<f64>,
    main_beam_angle: Option<f64>,
    cutoff_angle: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum RawAngles {
    List(Vec<f64>),
    Expr(String),
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawAcquisition {
    angles: Option<RawAngles>,
    sampling_frequency: Option<f64>,
    cycles: Option<f64>,
    dynamic_range: Option<f64>,
    speed_of_sound: Option<f64>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawTrace {
    rays_per_element: Option<usize>,
    max_bounces: Option<u32>,
    max_path_length: Option<f64>,
    seed: Option<u64>,
    secondary_mode: Option<String>,
    max_secondary_interactions: Option<u32>,
    num_samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    x_min: Option<f64>,
    x_max: Option<f64>,
    z_min: Option<f64>,
    z_max: Option<f64>,
    pixel_pitch: Option<f64>,
    image: Option<PathBuf>,
    rf: Option<PathBuf>,
    beamformed: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialConfig {
    pub impedance: f64,
    pub roughness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    /// Curved array; opening angle in degrees.
    Convex { radius: f64, opening_angle_deg: f64 },
    /// Flat array with the given element pitch.
    Linear { pitch: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransducerConfig {
    pub elements: usize,
    pub layout: Layout,
    pub elevational_extent: f64,
    pub center_frequency: f64,
    pub main_beam_angle_deg: f64,
    pub cutoff_angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondaryModeConfig {
    Binary,
    Transmissive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Absolute path of the mesh file.
    pub scene_file: PathBuf,
    pub background: String,
    pub materials: BTreeMap<String, MaterialConfig>,
    /// Mesh name to material name, for every mesh in the scene file.
    pub mesh_materials: BTreeMap<String, String>,
    pub default_material: Option<String>,
    pub transducer: TransducerConfig,
    pub angles_deg: Vec<f64>,
    pub sampling_frequency: f64,
    pub cycles: f64,
    pub dynamic_range_db: f64,
    pub speed_of_sound: f64,
    pub rays_per_element: usize,
    pub max_bounces: u32,
    pub max_path_length: f64,
    pub seed: u64,
    pub secondary_mode: SecondaryModeConfig,
    pub max_secondary_interactions: u32,
    pub num_samples: Option<usize>,
    pub grid: [f64; 5],
    pub image: PathBuf,
    pub rf: Option<PathBuf>,
    pub beamformed: Option<PathBuf>,
}

pub fn parse_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_str(&text, base)
}

/// Parses config text; relative scene paths resolve against `base`.
pub fn parse_str(text: &str, base: &Path) -> Result<SimConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| invalid("<file>", e.to_string()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let message = e.into_inner().message().to_string();
        invalid(key, message)
    })?;
    resolve(raw, base)
}

/// `linspace(first, last, count)` in degrees, endpoints included.
pub fn parse_linspace(expr: &str) -> Option<Vec<f64>> {
    let inner = expr.trim().strip_prefix("linspace")?.trim().strip_prefix('(')?.strip_suffix(')')?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    let [first, last, count] = parts.as_slice() else {
        return None;
    };
    let (first, last): (f64, f64) = (first.parse().ok()?, last.parse().ok()?);
    let count: usize = count.parse().ok()?;
    Some(match count {
        0 => Vec::new(),
        1 => vec![first],
        n => (0..n).map(|i| first + (last - first) * i as f64 / (n - 1) as f64).collect(),
    })
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be a positive number, got {v}")))
    }
}

fn at_least_one<T: PartialOrd + From<u8> + std::fmt::Display>(key: &str, v: T) -> Result<T, ConfigError> {
    if v >= T::from(1) {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be at least 1, got {v}")))
    }
}

fn resolve(raw: RawConfig, base: &Path) -> Result<SimConfig, ConfigError> {
    let scene = raw.scene.ok_or_else(|| invalid("scene", "missing section"))?;
    let file = scene.file.ok_or_else(|| invalid("scene.file", "missing required key"))?;
    let scene_file = if file.is_absolute() { file } else { base.join(file) };

    let mut materials = BTreeMap::new();
    for (name, m) in raw.materials {
        let key = format!("materials.{name}");
        let impedance = m
            .impedance
            .ok_or_else(|| invalid(format!("{key}.impedance"), "missing required key"))?;
        let impedance = positive(&format!("{key}.impedance"), impedance)?;
        let roughness = m.roughness.unwrap_or(DEFAULT_ROUGHNESS);
        if !(roughness > 0.0 && roughness <= 1.0) {
            return Err(invalid(format!("{key}.roughness"), format!("must lie in (0, 1], got {roughness}")));
        }
        materials.insert(name, MaterialConfig { impedance, roughness });
    }
    let background = scene.background.unwrap_or_else(|| WATER.to_string());
    if !materials.contains_key(&background) {
        if background != WATER {
            return Err(invalid("scene.background", format!("unknown material '{background}'")));
        }
        materials.insert(
            WATER.to_string(),
            MaterialConfig {
                impedance: WATER_IMPEDANCE,
                roughness: DEFAULT_ROUGHNESS,
            },
        );
    }
    let solids: Vec<&String> = materials.keys().filter(|n| **n != background).collect();
    if solids.is_empty() {
        return Err(invalid("materials", "need at least one material besides the background"));
    }
    let default_material = match scene.default_material {
        Some(m) if materials.contains_key(&m) => Some(m),
        Some(m) => return Err(invalid("scene.default_material", format!("unknown material '{m}'"))),
        None if solids.len() == 1 => Some(solids[0].clone()),
        None => None,
    };
    let mesh_materials = scene.meshes.unwrap_or_default();
    for (mesh, material) in &mesh_materials {
        if !materials.contains_key(material) {
            return Err(invalid(format!("scene.meshes.{mesh}"), format!("unknown material '{material}'")));
        }
    }

    let t = raw.transducer.unwrap_or_default();
    let layout = match (t.pitch, t.radius, t.opening_angle) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(invalid("transducer.pitch", "cannot be combined with radius or opening_angle"))
        }
        (Some(p), None, None) => Layout::Linear {
            pitch: positive("transducer.pitch", p)?,
        },
        (None, r, a) => {
            let radius = positive("transducer.radius", r.unwrap_or(0.06))?;
            let opening_angle_deg = a.unwrap_or(70.0);
            if !(0.0..360.0).contains(&opening_angle_deg) {
                return Err(invalid("transducer.opening_angle", format!("must lie in [0, 360), got {opening_angle_deg}")));
            }
            Layout::Convex {
                radius,
                opening_angle_deg,
            }
        }
    };
    let main_beam_angle_deg = t.main_beam_angle.unwrap_or(2.0);
    let cutoff_angle_deg = t.cutoff_angle.unwrap_or(2.0);
    if !(0.0..=90.0).contains(&main_beam_angle_deg) {
        return Err(invalid("transducer.main_beam_angle", format!("must lie in [0, 90], got {main_beam_angle_deg}")));
    }
    if !(main_beam_angle_deg..=90.0).contains(&cutoff_angle_deg) {
        return Err(invalid(
            "transducer.cutoff_angle",
            format!("must lie in [main_beam_angle, 90], got {cutoff_angle_deg}"),
        ));
    }
    let transducer = TransducerConfig {
        elements: at_least_one("transducer.elements", t.elements.unwrap_or(128))?,
        layout,
        elevational_extent: positive("transducer.elevational_extent", t.elevational_extent.unwrap_or(0.004))?,
        center_frequency: positive("transducer.center_frequency", t.center_frequency.unwrap_or(5e6))?,
        main_beam_angle_deg,
        cutoff_angle_deg,
    };

    let a = raw.acquisition.unwrap_or_default();
    let angles_deg = match a.angles {
        None => parse_linspace("linspace(-30, 30, 25)").expect("valid default"),
        Some(RawAngles::List(v)) => v,
        Some(RawAngles::Expr(s)) => parse_linspace(&s)
            .ok_or_else(|| invalid("acquisition.angles", format!("expected a list or linspace(first, last, count), got '{s}'")))?,
    };
    if angles_deg.is_empty() {
        return Err(invalid("acquisition.angles", "no angles"));
    }
    if angles_deg.iter().any(|a| !(a.abs() < 90.0)) {
        return Err(invalid("acquisition.angles", "angles must lie in (-90, 90) degrees"));
    }
    if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("acquisition.angles", "angles must be strictly increasing"));
    }
    let sampling_frequency = positive(
        "acquisition.sampling_frequency",
        a.sampling_frequency.unwrap_or(DEFAULT_SAMPLING_FREQUENCY),
    )?;
    if sampling_frequency <= 2.0 * transducer.center_frequency {
        return Err(invalid(
            "acquisition.sampling_frequency",
            format!("must exceed twice the center frequency ({} Hz)", transducer.center_frequency),
        ));
    }
    let cycles = a.cycles.unwrap_or(DEFAULT_CYCLES);
    if !(cycles >= 1.0 && cycles.is_finite()) {
        return Err(invalid("acquisition.cycles", format!("must be at least 1, got {cycles}")));
    }

    let tr = raw.trace.unwrap_or_default();
    let max_bounces = at_least_one("trace.max_bounces", tr.max_bounces.unwrap_or(DEFAULT_MAX_BOUNCES))?;
    let secondary_mode = match tr.secondary_mode.as_deref() {
        None | Some("transmissive") => SecondaryModeConfig::Transmissive,
        Some("binary") => SecondaryModeConfig::Binary,
        Some(other) => {
            return Err(invalid(
                "trace.secondary_mode",
                format!("expected 'binary' or 'transmissive', got '{other}'"),
            ))
        }
    };
    let num_samples = match tr.num_samples {
        Some(n) => Some(at_least_one("trace.num_samples", n)?),
        None => None,
    };

    let o = raw.output.unwrap_or_default();
    let grid = [
        o.x_min.unwrap_or(-0.02),
        o.x_max.unwrap_or(0.02),
        o.z_min.unwrap_or(0.005),
        o.z_max.unwrap_or(0.08),
        positive("output.pixel_pitch", o.pixel_pitch.unwrap_or(1e-4))?,
    ];
    if grid[..4].iter().any(|v| !v.is_finite()) {
        return Err(invalid("output", "grid extents must be finite"));
    }
    if grid[1] <= grid[0] {
        return Err(invalid("output.x_max", "must exceed output.x_min"));
    }
    if grid[3] <= grid[2] {
        return Err(invalid("output.z_max", "must exceed output.z_min"));
    }

    Ok(SimConfig {
        scene_file,
        background,
        materials,
        mesh_materials,
        default_material,
        transducer,
        angles_deg,
        sampling_frequency,
        cycles,
        dynamic_range_db: positive("acquisition.dynamic_range", a.dynamic_range.unwrap_or(DEFAULT_DYNAMIC_RANGE))?,
        speed_of_sound: positive("acquisition.speed_of_sound", a.speed_of_sound.unwrap_or(DEFAULT_SPEED_OF_SOUND))?,
        rays_per_element: at_least_one("trace.rays_per_element", tr.rays_per_element.unwrap_or(DEFAULT_RAYS_PER_ELEMENT))?,
        max_bounces,
        max_path_length: positive("trace.max_path_length", tr.max_path_length.unwrap_or(DEFAULT_MAX_PATH_LENGTH))?,
        seed: tr.seed.unwrap_or(0),
        secondary_mode,
        max_secondary_interactions: at_least_one(
            "trace.max_secondary_interactions",
            tr.max_secondary_interactions.unwrap_or(max_bounces),
        )?,
        num_samples,
        grid,
        image: o.image.unwrap_or_else(|| PathBuf::from("bmode.pgm")),
        rf: o.rf,
        beamformed: o.beamformed,
    })
}

impl SimConfig {
    /// The config with every default written out, in the input format.
    pub fn to_toml(&self) -> String {
        let (radius, opening_angle, pitch) = match self.transducer.layout {
            Layout::Convex {
                radius,
                opening_angle_deg,
            } => (Some(radius), Some(opening_angle_deg), None),
            Layout::Linear { pitch } => (None, None, Some(pitch)),
        };
        let raw = RawConfig {
            scene: Some(RawScene {
                file: Some(self.scene_file.clone()),
                background: Some(self.background.clone()),
                default_material: self.default_material.clone(),
                meshes: Some(self.mesh_materials.clone()),
            }),
            materials: self
                .materials
                .iter()
                .map(|(k, m)| {
                    (
                        k.clone(),
                        RawMaterial {
                            impedance: Some(m.impedance),
                            roughness: Some(m.roughness),
                        },
                    )
                })
                .collect(),
            transducer: Some(RawTransducer {
                elements: Some(self.transducer.elements),
                radius,
                opening_angle,
                pitch,
                elevational_extent: Some(self.transducer.elevational_extent),
                center_frequency: Some(self.transducer.center_frequency),
                main_beam_angle: Some(self.transducer.main_beam_angle_deg),
                cutoff_angle: Some(self.transducer.cutoff_angle_deg),
            }),
            acquisition: Some(RawAcquisition {
                angles: Some(RawAngles::List(self.angles_deg.clone())),
                sampling_frequency: Some(self.sampling_frequency),
                cycles: Some(self.cycles),
                dynamic_range: Some(self.dynamic_range_db),
                speed_of_sound: Some(self.speed_of_sound),
            }),
            trace: Some(RawTrace {
                rays_per_element: Some(self.rays_per_element),
                max_bounces: Some(self.max_bounces),
                max_path_length: Some(self.max_path_length),
                seed: Some(self.seed),
                secondary_mode: Some(
                    match self.secondary_mode {
                        SecondaryModeConfig::Binary => "binary",
                        SecondaryModeConfig::Transmissive => "transmissive",
                    }
                    .to_string(),
                ),
                max_secondary_interactions: Some(self.max_secondary_interactions),
                num_samples: self.num_samples,
            }),
            output: Some(RawOutput {
                x_min: Some(self.grid[0]),
                x_max: Some(self.grid[1]),
                z_min: Some(self.grid[2]),
                z_max: Some(self.grid[3]),
                pixel_pitch: Some(self.grid[4]),
                image: Some(self.image.clone()),
                rf: self.rf.clone(),
                beamformed: self.beamformed.clone(),
            }),
        };
        toml::to_string(&raw).expect("config serializes")
    }
}
