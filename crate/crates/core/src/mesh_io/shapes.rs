//! Procedural closed test surfaces.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use nalgebra::Point3;

use super::TriMesh;

/// Builds triangles on an integer lattice, sharing vertices by lattice point.
struct LatticeBuilder {
    origin: [f64; 3],
    cell: [f64; 3],
    index: HashMap<[i64; 3], usize>,
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
}

impl LatticeBuilder {
    fn new(origin: [f64; 3], cell: [f64; 3]) -> Self {
        LatticeBuilder { origin, cell, index: HashMap::new(), vertices: Vec::new(), faces: Vec::new() }
    }

    fn vertex(&mut self, p: [i64; 3]) -> usize {
        let next = self.vertices.len();
        let id = *self.index.entry(p).or_insert(next);
        if id == next {
            self.vertices.push(Point3::new(
                self.origin[0] + p[0] as f64 * self.cell[0],
                self.origin[1] + p[1] as f64 * self.cell[1],
                self.origin[2] + p[2] as f64 * self.cell[2],
            ));
        }
        id
    }

    /// Quad `corner, corner+u, corner+u+v, corner+v`, counter-clockwise when
    /// seen from the side `u x v` points to.
    fn quad(&mut self, corner: [i64; 3], u: [i64; 3], v: [i64; 3]) {
        let add = |a: [i64; 3], b: [i64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
        let p0 = self.vertex(corner);
        let p1 = self.vertex(add(corner, u));
        let p2 = self.vertex(add(add(corner, u), v));
        let p3 = self.vertex(add(corner, v));
        self.faces.push([p0, p1, p2]);
        self.faces.push([p0, p2, p3]);
    }

    fn finish(self) -> TriMesh {
        TriMesh::new(self.vertices, self.faces).expect("lattice surfaces are valid")
    }
}

const AXES: [[i64; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

fn scaled(a: [i64; 3], s: i64) -> [i64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Axis-aligned box `[0, size]` split into `cells[a]` segments along axis `a`.
/// Faces are emitted side by side in the order -x, +x, -y, +y, -z, +z, each
/// side as a row-major grid of quads split in two triangles.
pub fn make_box(size: [f64; 3], cells: [usize; 3]) -> TriMesh {
    assert!(cells.iter().all(|&c| c >= 1), "box needs at least one cell per axis");
    let cell = [size[0] / cells[0] as f64, size[1] / cells[1] as f64, size[2] / cells[2] as f64];
    let mut b = LatticeBuilder::new([0.0; 3], cell);
    let c = [cells[0] as i64, cells[1] as i64, cells[2] as i64];
    for axis in 0..3 {
        // (u, v) with u x v = +axis.
        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
        for positive in [false, true] {
            let (u, v, nu, nv) = if positive {
                (AXES[ua], AXES[va], c[ua], c[va])
            } else {
                (AXES[va], AXES[ua], c[va], c[ua])
            };
            let base = if positive { scaled(AXES[axis], c[axis]) } else { [0; 3] };
            for i in 0..nu {
                for j in 0..nv {
                    let corner = [
                        base[0] + u[0] * i + v[0] * j,
                        base[1] + u[1] * i + v[1] * j,
                        base[2] + u[2] * i + v[2] * j,
                    ];
                    b.quad(corner, u, v);
                }
            }
        }
    }
    b.finish()
}

/// Unit cube with each side split into `subdivision^2` squares, i.e.
/// `12 * subdivision^2` triangles.
pub fn make_test_cube(subdivision: usize) -> TriMesh {
    make_box([1.0; 3], [subdivision; 3])
}

/// Side index (1..=6) of every face of [`make_test_cube`], following its face order.
pub fn cube_side_labels(subdivision: usize) -> Vec<usize> {
    let per_side = 2 * subdivision * subdivision;
    (0..6 * per_side).map(|f| f / per_side + 1).collect()
}

/// Boundary surface of a union of unit voxels of edge length `cell`.
/// Voxels touching only along an edge or a corner yield non-manifold output.
pub fn voxel_surface(voxels: &[[i64; 3]], cell: f64) -> TriMesh {
    let filled: HashSet<[i64; 3]> = voxels.iter().copied().collect();
    let mut b = LatticeBuilder::new([0.0; 3], [cell; 3]);
    for &vx in voxels {
        for axis in 0..3 {
            let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
            for positive in [false, true] {
                let mut nb = vx;
                nb[axis] += if positive { 1 } else { -1 };
                if filled.contains(&nb) {
                    continue;
                }
                if positive {
                    let mut corner = vx;
                    corner[axis] += 1;
                    b.quad(corner, AXES[ua], AXES[va]);
                } else {
                    b.quad(vx, AXES[va], AXES[ua]);
                }
            }
        }
    }
    b.finish()
}

/// The `dims` voxels of the block starting at `origin`, x fastest.
pub fn voxel_block(origin: [i64; 3], dims: [i64; 3]) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                out.push([origin[0] + x, origin[1] + y, origin[2] + z]);
            }
        }
    }
    out
}

/// Icosphere of the given radius: `20 * 4^level` faces, outward normals.
pub fn make_icosphere(radius: f64, level: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    let normalize = |p: [f64; 3]| {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        [p[0] / n, p[1] / n, p[2] / n]
    };
    verts.iter_mut().for_each(|p| *p = normalize(*p));
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalize([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts
        .into_iter()
        .map(|p| Point3::new(p[0] * radius, p[1] * radius, p[2] * radius))
        .collect();
    TriMesh::new(vertices, faces).expect("icosphere is valid")
}

/// Torus around the z axis with `2 * nu * nv` faces.
pub fn make_torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriMesh {
    assert!(nu >= 3 && nv >= 3);
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            vertices.push(Point3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, faces).expect("torus is valid")
}

/// Closed cylinder along z with `segments` around, `rings` bands on the side
/// and fan caps: `2 * segments * (rings + 1)` faces.
pub fn make_cylinder(radius: f64, height: f64, segments: usize, rings: usize) -> TriMesh {
    assert!(segments >= 3 && rings >= 1);
    let mut vertices = Vec::new();
    for r in 0..=rings {
        let z = height * r as f64 / rings as f64;
        for s in 0..segments {
            let a = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Point3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let bottom = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, 0.0));
    let top = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, height));
    let id = |r: usize, s: usize| r * segments + s % segments;
    let mut faces = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            let (a, b, c, d) = (id(r, s), id(r, s + 1), id(r + 1, s + 1), id(r + 1, s));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for s in 0..segments {
        faces.push([bottom, id(0, s + 1), id(0, s)]);
    }
    for s in 0..segments {
        faces.push([top, id(rings, s), id(rings, s + 1)]);
    }
    TriMesh::new(vertices, faces).expect("cylinder is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_io::face_geometry;

    /// Signed volume by the divergence theorem; positive for outward normals.
    fn signed_volume(m: &TriMesh) -> f64 {
        m.faces()
            .iter()
            .map(|&[a, b, c]| {
                let (p, q, r) = (m.vertices()[a].coords, m.vertices()[b].coords, m.vertices()[c].coords);
                p.dot(&q.cross(&r)) / 6.0
            })
            .sum()
    }

    fn euler_characteristic(m: &TriMesh) -> i64 {
        m.n_vertices() as i64 - m.edge_faces().len() as i64 + m.n_faces() as i64
    }

    #[test]
    fn cube_counts() {
        assert_eq!(make_test_cube(1).n_faces(), 12);
        assert_eq!(make_test_cube(30).n_faces(), 10_800);
        let c5 = make_test_cube(5);
        assert_eq!(c5.n_faces(), 300);
        assert!(c5.is_watertight());
        assert_eq!(euler_characteristic(&c5), 2);
        assert!((signed_volume(&c5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cube_side_labels_match_normals() {
        let s = 4;
        let cube = make_test_cube(s);
        let g = face_geometry(&cube).unwrap();
        let labels = cube_side_labels(s);
        for side in 1..=6 {
            let normals: Vec<_> = (0..cube.n_faces()).filter(|&f| labels[f] == side).map(|f| g.normals[f]).collect();
            assert_eq!(normals.len(), 2 * s * s);
            assert!(normals.iter().all(|n| (n - normals[0]).norm() < 1e-12));
        }
    }

    #[test]
    fn box_and_voxels_are_closed_and_outward() {
        let b = make_box([2.0, 1.0, 0.5], [4, 3, 2]);
        assert!(b.is_watertight());
        assert!((signed_volume(&b) - 1.0).abs() < 1e-12);

        let mut l = voxel_block([0, 0, 0], [3, 1, 1]);
        l.extend(voxel_block([0, 1, 0], [1, 2, 1]));
        let m = voxel_surface(&l, 0.5);
        assert!(m.is_watertight());
        assert_eq!(euler_characteristic(&m), 2);
        assert!((signed_volume(&m) - 5.0 * 0.125).abs() < 1e-12);
    }

    #[test]
    fn smooth_shapes_are_closed_and_outward() {
        let s = make_icosphere(2.0, 2);
        assert_eq!(s.n_faces(), 320);
        assert!(s.is_watertight());
        assert!(signed_volume(&s) > 0.0);
        let t = make_torus(2.0, 0.5, 24, 12);
        assert_eq!(t.n_faces(), 576);
        assert!(t.is_watertight());
        assert_eq!(euler_characteristic(&t), 0);
        assert!(signed_volume(&t) > 0.0);
        let c = make_cylinder(1.0, 3.0, 16, 5);
        assert_eq!(c.n_faces(), 2 * 16 * 6);
        assert!(c.is_watertight());
        assert!(signed_volume(&c) > 0.0);
    }
}
