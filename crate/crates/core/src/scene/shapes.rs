//! Procedural meshes for synthetic test scenes. All closed shapes wind
//! counter-clockwise seen from outside, so normals point into the ambient
//! medium.

use super::Mesh;
use crate::math::Vec3;

/// Parallelogram `corner, corner + u, corner + u + v, corner + v`, normal
/// along `u × v`.
pub fn quad(name: &str, corner: Vec3, u: Vec3, v: Vec3) -> Mesh {
    let vertices = vec![corner, corner + u, corner + u + v, corner + v];
    Mesh::new(name, vertices, vec![[0, 1, 2], [0, 2, 3]]).expect("quad with independent edges")
}

/// Rectangle centered on `center` whose front face looks along `normal`.
/// `lateral` fixes the in-plane orientation of the `width` edge and is
/// projected onto the plane.
pub fn sheet(name: &str, center: Vec3, normal: Vec3, lateral: Vec3, width: f64, height: f64) -> Mesh {
    let n = normal.normalized();
    let u = (lateral - n * lateral.dot(n)).normalized();
    let v = n.cross(u);
    let corner = center - u * (width / 2.0) - v * (height / 2.0);
    // u × v = n.
    quad(name, corner, u * width, v * height)
}

/// Axis-aligned box between `min` and `max`.
pub fn cuboid(name: &str, min: Vec3, max: Vec3) -> Mesh {
    let v = |x: bool, y: bool, z: bool| {
        Vec3::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    let vertices = vec![
        v(false, false, false),
        v(true, false, false),
        v(true, true, false),
        v(false, true, false),
        v(false, false, true),
        v(true, false, true),
        v(true, true, true),
        v(false, true, true),
    ];
    let faces: [[u32; 4]; 6] = [
        [0, 3, 2, 1], // -z
        [4, 5, 6, 7], // +z
        [0, 1, 5, 4], // -y
        [2, 3, 7, 6], // +y
        [0, 4, 7, 3], // -x
        [1, 2, 6, 5], // +x
    ];
    let triangles = faces
        .iter()
        .flat_map(|f| [[f[0], f[1], f[2]], [f[0], f[2], f[3]]])
        .collect();
    Mesh::new(name, vertices, triangles).expect("non-degenerate box")
}

/// Geodesic sphere from a subdivided icosahedron.
pub fn icosphere(name: &str, center: Vec3, radius: f64, subdivisions: u32) -> Mesh {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints = std::collections::HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalized());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts.into_iter().map(|v| center + v * radius).collect();
    Mesh::new(name, vertices, faces).expect("non-degenerate sphere")
}

/// Writes a mesh in the wavefront-style text format.
pub fn to_obj(mesh: &Mesh) -> String {
    let mut out = format!("o {}\n", mesh.name);
    for v in &mesh.vertices {
        out.push_str(&format!("v {:.9} {:.9} {:.9}\n", v.x, v.y, v.z));
    }
    for [a, b, c] in &mesh.triangles {
        out.push_str(&format!("f {} {} {}\n", a + 1, b + 1, c + 1));
    }
    out
}
