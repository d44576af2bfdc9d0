//! Scene description: triangle meshes, acoustic materials, the ambient
//! medium, and a bounding-volume hierarchy for ray queries.

mod bvh;
mod obj;
pub mod shapes;

use thiserror::Error;

use crate::math::Vec3;

pub use bvh::{intersect_triangle, Accelerator, BvhStats, Triangle};
pub use obj::{load_mesh, load_meshes, parse_obj, MeshFormat};

/// Distance a ray origin is pushed along its direction before every query.
pub const SELF_INTERSECTION_OFFSET: f64 = 1e-4;

/// Triangles with an area at or below this value (m²) are rejected.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: vertex index {index} out of range (1..={count})")]
    IndexOutOfRange { line: usize, index: i64, count: usize },
    #[error("mesh '{mesh}': triangle {triangle} is degenerate (area {area:e} m²)")]
    Degenerate { mesh: String, triangle: usize, area: f64 },
    #[error("mesh '{mesh}': triangle {triangle} references vertex {index} but only {count} exist")]
    BadTriangle { mesh: String, triangle: usize, index: u32, count: usize },
    #[error("material '{name}': {message}")]
    InvalidMaterial { name: String, message: String },
    #[error("unknown material '{0}'")]
    UnknownMaterial(String),
    #[error("speed of sound must be positive and finite, got {0}")]
    InvalidSpeedOfSound(f64),
}

/// Index into a scene's material table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MaterialId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    /// Acoustic impedance in MRayl.
    pub impedance: f64,
    /// GGX roughness, in (0, 1].
    pub roughness: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, impedance: f64, roughness: f64) -> Result<Material, SceneError> {
        let name = name.into();
        if !(impedance > 0.0 && impedance.is_finite()) {
            return Err(SceneError::InvalidMaterial {
                name,
                message: format!("impedance must be > 0, got {impedance}"),
            });
        }
        if !(roughness > 0.0 && roughness <= 1.0) {
            return Err(SceneError::InvalidMaterial {
                name,
                message: format!("roughness must be in (0, 1], got {roughness}"),
            });
        }
        Ok(Material { name, impedance, roughness })
    }
}

/// A validated triangle mesh. Normals are flat and follow the winding order
/// (counter-clockwise seen from outside).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub material: MaterialId,
}

impl Mesh {
    pub fn new(name: impl Into<String>, vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Mesh, SceneError> {
        let mesh = Mesh {
            name: name.into(),
            vertices,
            triangles,
            material: MaterialId::default(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<(), SceneError> {
        let count = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i as usize >= count) {
                return Err(SceneError::BadTriangle {
                    mesh: self.name.clone(),
                    triangle: t,
                    index,
                    count,
                });
            }
            let area = self.triangle_area(t);
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(SceneError::Degenerate {
                    mesh: self.name.clone(),
                    triangle: t,
                    area,
                });
            }
        }
        Ok(())
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * (b - a).cross(c - a).length()
    }

    /// Unit normal from the winding order.
    pub fn triangle_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle_vertices(t);
        (b - a).cross(c - a).normalized()
    }

    pub fn with_material(mut self, material: MaterialId) -> Mesh {
        self.material = material;
        self
    }
}

/// Meshes plus the material table and the ambient medium.
#[derive(Debug, Clone)]
pub struct Scene {
    pub meshes: Vec<Mesh>,
    pub materials: Vec<Material>,
    pub background: MaterialId,
    /// Speed of sound in m/s, uniform over the whole scene.
    pub speed_of_sound: f64,
}

impl Scene {
    /// Creates an empty scene. `background` must name one of `materials`.
    pub fn new(materials: Vec<Material>, background: &str, speed_of_sound: f64) -> Result<Scene, SceneError> {
        if !(speed_of_sound > 0.0 && speed_of_sound.is_finite()) {
            return Err(SceneError::InvalidSpeedOfSound(speed_of_sound));
        }
        let mut scene = Scene {
            meshes: Vec::new(),
            materials,
            background: MaterialId(0),
            speed_of_sound,
        };
        scene.background = scene.material_id(background)?;
        Ok(scene)
    }

    pub fn material_id(&self, name: &str) -> Result<MaterialId, SceneError> {
        self.materials
            .iter()
            .position(|m| m.name == name)
            .map(MaterialId)
            .ok_or_else(|| SceneError::UnknownMaterial(name.to_string()))
    }

    pub fn material(&self, id: MaterialId) -> &Material {
        &self.materials[id.0]
    }

    /// Adds a mesh filled with the named material.
    pub fn add_mesh(&mut self, mesh: Mesh, material: &str) -> Result<(), SceneError> {
        let id = self.material_id(material)?;
        self.meshes.push(mesh.with_material(id));
        Ok(())
    }

    pub fn triangle_count(&self) -> usize {
        self.meshes.iter().map(|m| m.triangles.len()).sum()
    }

    /// Impedances `(Z1, Z2)` on the incident and far side of the interface.
    pub fn material_pair_at(&self, hit: &Hit) -> (f64, f64) {
        let inside = self.material(hit.material_inside).impedance;
        let outside = self.material(hit.material_outside).impedance;
        if hit.front_face {
            (outside, inside)
        } else {
            (inside, outside)
        }
    }

    /// Roughness of the interface that was hit (the mesh material's).
    pub fn roughness_at(&self, hit: &Hit) -> f64 {
        self.material(hit.material_inside).roughness
    }
}

/// Nearest intersection of a ray with the scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub position: Vec3,
    /// Unit normal, flipped if necessary so that it faces the incoming ray.
    pub geometric_normal: Vec3,
    /// Distance from the unshifted ray origin.
    pub distance: f64,
    pub material_inside: MaterialId,
    pub material_outside: MaterialId,
    /// True when the ray arrived from the outward side of the winding normal.
    pub front_face: bool,
    /// Global triangle index in the accelerator.
    pub triangle: usize,
}
