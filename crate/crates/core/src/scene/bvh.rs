//! Binned-SAH bounding volume hierarchy over all scene triangles.

use super::{Hit, MaterialId, Scene, SELF_INTERSECTION_OFFSET};
use crate::math::Vec3;

const BINS: usize = 16;
const MAX_LEAF: usize = 4;
const TRAVERSAL_COST: f64 = 1.0;
const TRIANGLE_COST: f64 = 1.5;

/// A triangle prepared for intersection tests.
#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub v0: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    /// Unit normal from the winding order.
    pub normal: Vec3,
    pub material_inside: MaterialId,
    pub material_outside: MaterialId,
    pub mesh: usize,
    /// Global index: meshes in scene order, triangles in mesh order.
    pub id: usize,
}

impl Triangle {
    fn bounds(&self) -> Aabb {
        let a = self.v0;
        let b = self.v0 + self.e1;
        let c = self.v0 + self.e2;
        Aabb {
            min: a.min(b).min(c),
            max: a.max(b).max(c),
        }
    }

    fn centroid(&self) -> Vec3 {
        self.v0 + (self.e1 + self.e2) / 3.0
    }
}

/// Möller–Trumbore ray/triangle test, two-sided. Returns the ray parameter
/// if it lies strictly inside `(t_min, t_max)`.
#[inline]
pub fn intersect_triangle(tri: &Triangle, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<f64> {
    let p = dir.cross(tri.e2);
    let det = tri.e1.dot(p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - tri.v0;
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(tri.e1);
    let v = dir.dot(q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = tri.e2.dot(q) * inv_det;
    (t > t_min && t < t_max).then_some(t)
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    const EMPTY: Aabb = Aabb {
        min: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
        max: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    fn union(self, o: Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    fn grow(self, p: Vec3) -> Aabb {
        Aabb {
            min: self.min.min(p),
            max: self.max.max(p),
        }
    }

    fn surface_area(&self) -> f64 {
        let d = self.max - self.min;
        if d.x < 0.0 {
            return 0.0;
        }
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    /// Slab test; returns the entry distance if the box is hit before `t_max`.
    #[inline]
    fn hit(&self, origin: Vec3, inv_dir: Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0_f64;
        let mut t1 = t_max;
        for axis in 0..3 {
            if inv_dir[axis].is_infinite() {
                if origin[axis] < self.min[axis] || origin[axis] > self.max[axis] {
                    return None;
                }
                continue;
            }
            let a = (self.min[axis] - origin[axis]) * inv_dir[axis];
            let b = (self.max[axis] - origin[axis]) * inv_dir[axis];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
        }
        // Widen slightly so rounding in the slab test never culls a triangle
        // that the exact test would accept.
        (t0 <= t1 * (1.0 + 1e-12) + 1e-12).then_some(t0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first triangle. Interior: index of the second child (the first
    /// child always follows its parent directly).
    index: u32,
    /// Number of triangles for a leaf, 0 for interior nodes.
    count: u32,
    axis: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BvhStats {
    pub nodes: usize,
    pub leaves: usize,
    pub depth: usize,
}

/// Immutable ray-query structure built from a [`Scene`].
#[derive(Debug, Clone)]
pub struct Accelerator {
    triangles: Vec<Triangle>,
    nodes: Vec<Node>,
}

impl Accelerator {
    pub fn build(scene: &Scene) -> Accelerator {
        let mut triangles = Vec::with_capacity(scene.triangle_count());
        for (m, mesh) in scene.meshes.iter().enumerate() {
            for t in 0..mesh.triangles.len() {
                let [a, b, c] = mesh.triangle_vertices(t);
                triangles.push(Triangle {
                    v0: a,
                    e1: b - a,
                    e2: c - a,
                    normal: mesh.triangle_normal(t),
                    material_inside: mesh.material,
                    material_outside: scene.background,
                    mesh: m,
                    id: triangles.len(),
                });
            }
        }
        Self::from_triangles(triangles)
    }

    pub fn from_triangles(mut triangles: Vec<Triangle>) -> Accelerator {
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            let bounds: Vec<Aabb> = triangles.iter().map(Triangle::bounds).collect();
            let centroids: Vec<Vec3> = triangles.iter().map(Triangle::centroid).collect();
            let mut order: Vec<usize> = (0..triangles.len()).collect();
            let len = order.len();
            build_node(&mut nodes, &mut order, 0, len, &bounds, &centroids);
            triangles = order.iter().map(|&i| triangles[i]).collect();
        }
        Accelerator { triangles, nodes }
    }

    /// Triangles in leaf order.
    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn stats(&self) -> BvhStats {
        let leaves = self.nodes.iter().filter(|n| n.count > 0).count();
        let mut depth = 0;
        if !self.nodes.is_empty() {
            let mut stack = vec![(0usize, 1usize)];
            while let Some((i, d)) = stack.pop() {
                depth = depth.max(d);
                let node = &self.nodes[i];
                if node.count == 0 {
                    stack.push((i + 1, d + 1));
                    stack.push((node.index as usize, d + 1));
                }
            }
        }
        BvhStats {
            nodes: self.nodes.len(),
            leaves,
            depth,
        }
    }

    /// Triangle ids of every leaf, in traversal order.
    pub fn leaf_partition(&self) -> Vec<Vec<usize>> {
        self.nodes
            .iter()
            .filter(|n| n.count > 0)
            .map(|n| {
                let start = n.index as usize;
                self.triangles[start..start + n.count as usize].iter().map(|t| t.id).collect()
            })
            .collect()
    }

    /// Nearest triangle with `t_min < t < t_max`, as `(position in
    /// [`Self::triangles`], t)`. Equal distances resolve to the smaller id.
    pub fn closest(&self, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(usize, f64)> = None;
        let mut limit = t_max;
        let mut stack = [0u32; 64];
        let mut top = 1usize;
        stack[0] = 0;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            // Boxes touching `limit` may still hold an equal-distance tie.
            if node.bounds.hit(origin, inv, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.index as usize;
                for (k, tri) in self.triangles[start..start + node.count as usize].iter().enumerate() {
                    if let Some(t) = intersect_triangle(tri, origin, dir, t_min, t_max) {
                        let better = match best {
                            None => true,
                            Some((b, bt)) => t < bt || (t == bt && tri.id < self.triangles[b].id),
                        };
                        if better {
                            best = Some((start + k, t));
                            limit = t;
                        }
                    }
                }
            } else {
                let first = stack[top] + 1;
                let second = node.index;
                // Push the far child first so the near one is popped next.
                let (near, far) = if dir[node.axis as usize] >= 0.0 {
                    (first, second)
                } else {
                    (second, first)
                };
                stack[top] = far;
                stack[top + 1] = near;
                top += 2;
            }
        }
        best
    }

    /// True if any triangle lies strictly within `(t_min, t_max)`.
    pub fn any(&self, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = [0u32; 64];
        let mut top = 1usize;
        while top > 0 {
            top -= 1;
            let idx = stack[top];
            let node = &self.nodes[idx as usize];
            if node.bounds.hit(origin, inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.index as usize;
                if self.triangles[start..start + node.count as usize]
                    .iter()
                    .any(|tri| intersect_triangle(tri, origin, dir, t_min, t_max).is_some())
                {
                    return true;
                }
            } else {
                stack[top] = idx + 1;
                stack[top + 1] = node.index;
                top += 2;
            }
        }
        false
    }

    /// Nearest scene hit along a unit `direction`. The origin is first moved
    /// by [`SELF_INTERSECTION_OFFSET`] along the ray; the reported distance is
    /// measured from the original origin and never exceeds `t_max`.
    pub fn intersect(&self, origin: Vec3, direction: Vec3, t_max: f64) -> Option<Hit> {
        let shifted = origin + direction * SELF_INTERSECTION_OFFSET;
        let limit = t_max - SELF_INTERSECTION_OFFSET;
        if !(limit > 0.0) {
            return None;
        }
        let (k, t) = self.closest(shifted, direction, 0.0, limit)?;
        let tri = &self.triangles[k];
        let front_face = direction.dot(tri.normal) < 0.0;
        Some(Hit {
            position: shifted + direction * t,
            geometric_normal: if front_face { tri.normal } else { -tri.normal },
            distance: t + SELF_INTERSECTION_OFFSET,
            material_inside: tri.material_inside,
            material_outside: tri.material_outside,
            front_face,
            triangle: tri.id,
        })
    }

    /// Occlusion query with the same origin offset as [`Self::intersect`].
    pub fn occluded(&self, origin: Vec3, direction: Vec3, t_max: f64) -> bool {
        let shifted = origin + direction * SELF_INTERSECTION_OFFSET;
        let limit = t_max - SELF_INTERSECTION_OFFSET;
        limit > 0.0 && self.any(shifted, direction, 0.0, limit)
    }
}

#[allow(clippy::needless_range_loop)] // `axis` indexes vector components, not a slice
fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    bounds: &[Aabb],
    centroids: &[Vec3],
) -> usize {
    let slice = &mut order[start..end];
    let node_bounds = slice.iter().fold(Aabb::EMPTY, |b, &i| b.union(bounds[i]));
    let index = nodes.len();
    nodes.push(Node {
        bounds: node_bounds,
        index: start as u32,
        count: slice.len() as u32,
        axis: 0,
    });
    if slice.len() <= MAX_LEAF {
        return index;
    }

    let centroid_bounds = slice.iter().fold(Aabb::EMPTY, |b, &i| b.grow(centroids[i]));
    let leaf_cost = TRIANGLE_COST * slice.len() as f64;
    let parent_area = node_bounds.surface_area().max(1e-300);

    let mut best: Option<(f64, usize, f64)> = None; // (cost, axis, split)
    for axis in 0..3 {
        let lo = centroid_bounds.min[axis];
        let extent = centroid_bounds.max[axis] - lo;
        if !(extent > 0.0) {
            continue;
        }
        let mut bin_bounds = [Aabb::EMPTY; BINS];
        let mut bin_counts = [0usize; BINS];
        for &i in slice.iter() {
            let b = bin_of(centroids[i][axis], lo, extent);
            bin_counts[b] += 1;
            bin_bounds[b] = bin_bounds[b].union(bounds[i]);
        }
        let mut right_area = [0.0; BINS];
        let mut right_count = [0usize; BINS];
        let mut acc = Aabb::EMPTY;
        let mut cnt = 0;
        for b in (1..BINS).rev() {
            acc = acc.union(bin_bounds[b]);
            cnt += bin_counts[b];
            right_area[b] = acc.surface_area();
            right_count[b] = cnt;
        }
        let mut acc = Aabb::EMPTY;
        let mut cnt = 0;
        for b in 0..BINS - 1 {
            acc = acc.union(bin_bounds[b]);
            cnt += bin_counts[b];
            if cnt == 0 || right_count[b + 1] == 0 {
                continue;
            }
            let cost = TRAVERSAL_COST
                + TRIANGLE_COST
                    * (acc.surface_area() * cnt as f64 + right_area[b + 1] * right_count[b + 1] as f64)
                    / parent_area;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, lo + extent * (b + 1) as f64 / BINS as f64));
            }
        }
    }

    let (axis, mid) = match best {
        Some((cost, axis, split)) if cost < leaf_cost || slice.len() > 4 * MAX_LEAF => {
            let lo = centroid_bounds.min[axis];
            let extent = centroid_bounds.max[axis] - lo;
            let split_bin = bin_of(split, lo, extent);
            let mut mid = partition(slice, |&i| bin_of(centroids[i][axis], lo, extent) < split_bin);
            if mid == 0 || mid == slice.len() {
                mid = median_split(slice, centroids, axis);
            }
            (axis, mid)
        }
        Some(_) => return index,
        None => {
            // All centroids coincide: split by count along any axis.
            if slice.len() <= 4 * MAX_LEAF {
                return index;
            }
            (0, median_split(slice, centroids, 0))
        }
    };

    build_node(nodes, order, start, start + mid, bounds, centroids);
    let second = build_node(nodes, order, start + mid, end, bounds, centroids);
    nodes[index].index = second as u32;
    nodes[index].count = 0;
    nodes[index].axis = axis as u8;
    index
}

fn bin_of(value: f64, lo: f64, extent: f64) -> usize {
    let b = ((value - lo) / extent * BINS as f64) as usize;
    b.min(BINS - 1)
}

fn median_split(slice: &mut [usize], centroids: &[Vec3], axis: usize) -> usize {
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
    });
    mid
}

fn partition(slice: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let mut first = 0;
    for i in 0..slice.len() {
        if pred(&slice[i]) {
            slice.swap(first, i);
            first += 1;
        }
    }
    first
}
