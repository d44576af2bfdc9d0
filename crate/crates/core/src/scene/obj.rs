//! Reader for the wavefront-style text subset used for scene meshes.
//!
//! Only `v x y z` (meters) and `f i j k [l ...]` (1-based) lines carry
//! geometry. `o` and `g` lines start a new named object when loading with
//! [`load_meshes`]; everything else is ignored. Polygons are fan-split.

use std::fs;
use std::path::Path;

use super::{Mesh, SceneError};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeshFormat {
    #[default]
    Obj,
}

/// Loads every face in the file as a single mesh named after the file stem.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Mesh, SceneError> {
    let MeshFormat::Obj = format;
    let text = read(path)?;
    let name = stem(path);
    let objects = parse(&text, &name, false)?;
    let (name, triangles) = objects.into_iter().next().unwrap_or((name, Vec::new()));
    build(name, &text, triangles)
}

/// Loads the file as one mesh per `o`/`g` object. Faces before the first
/// object line belong to a mesh named after the file stem.
pub fn load_meshes(path: &Path, format: MeshFormat) -> Result<Vec<Mesh>, SceneError> {
    let MeshFormat::Obj = format;
    let text = read(path)?;
    parse_obj(&text, &stem(path))
}

/// Parses OBJ text into one mesh per object. Each mesh keeps only the
/// vertices its faces reference.
pub fn parse_obj(text: &str, default_name: &str) -> Result<Vec<Mesh>, SceneError> {
    parse(text, default_name, true)?
        .into_iter()
        .map(|(name, tris)| build(name, text, tris))
        .collect()
}

fn read(path: &Path) -> Result<String, SceneError> {
    fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".to_string())
}

type Objects = Vec<(String, Vec<[usize; 3]>)>;

fn parse(text: &str, default_name: &str, split: bool) -> Result<Objects, SceneError> {
    let mut vertex_count = 0usize;
    let mut objects: Objects = vec![(default_name.to_string(), Vec::new())];

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(parse_err(line, "vertex needs three coordinates"));
                }
                for c in &coords[..3] {
                    let value: f64 = c
                        .parse()
                        .map_err(|_| parse_err(line, &format!("invalid coordinate '{c}'")))?;
                    if !value.is_finite() {
                        return Err(parse_err(line, "non-finite coordinate"));
                    }
                }
                vertex_count += 1;
            }
            Some("f") => {
                let mut indices = Vec::new();
                for tok in tokens {
                    let index_str = tok.split('/').next().unwrap_or("");
                    let index: i64 = index_str
                        .parse()
                        .map_err(|_| parse_err(line, &format!("invalid face index '{tok}'")))?;
                    if index < 1 || index as usize > vertex_count {
                        return Err(SceneError::IndexOutOfRange {
                            line,
                            index,
                            count: vertex_count,
                        });
                    }
                    indices.push(index as usize - 1);
                }
                if indices.len() < 3 {
                    return Err(parse_err(line, "face needs at least three vertices"));
                }
                let tris = &mut objects.last_mut().expect("non-empty").1;
                for k in 1..indices.len() - 1 {
                    tris.push([indices[0], indices[k], indices[k + 1]]);
                }
            }
            Some("o") | Some("g") if split => {
                let name = tokens.collect::<Vec<_>>().join(" ");
                let name = if name.is_empty() { default_name.to_string() } else { name };
                objects.push((name, Vec::new()));
            }
            _ => {}
        }
    }

    if split {
        objects.retain(|(_, tris)| !tris.is_empty());
    }
    Ok(objects)
}

fn parse_err(line: usize, message: &str) -> SceneError {
    SceneError::Parse {
        line,
        message: message.to_string(),
    }
}

fn vertices(text: &str) -> Vec<Vec3> {
    // Already validated by `parse`.
    text.lines()
        .filter_map(|raw| {
            let mut tokens = raw.split('#').next().unwrap_or("").split_whitespace();
            if tokens.next() != Some("v") {
                return None;
            }
            let mut c = tokens.map(|t| t.parse::<f64>().unwrap_or(f64::NAN));
            Some(Vec3::new(c.next()?, c.next()?, c.next()?))
        })
        .collect()
}

fn build(name: String, text: &str, triangles: Vec<[usize; 3]>) -> Result<Mesh, SceneError> {
    let all = vertices(text);
    let mut remap = vec![u32::MAX; all.len()];
    let mut verts = Vec::new();
    let mut tris = Vec::with_capacity(triangles.len());
    for tri in triangles {
        let mut out = [0u32; 3];
        for (slot, &v) in out.iter_mut().zip(tri.iter()) {
            if remap[v] == u32::MAX {
                remap[v] = verts.len() as u32;
                verts.push(all[v]);
            }
            *slot = remap[v];
        }
        tris.push(out);
    }
    Mesh::new(name, verts, tris)
}
