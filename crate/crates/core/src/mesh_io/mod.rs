//! Triangle meshes: loading, validation, per-face geometry and adjacency.

mod formats;
pub mod shapes;

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::cluster::Segmentation;
use crate::error::{FssError, Result};

pub use formats::{read_obj, read_off, read_ply, write_colored_ply, write_off, MeshFormat};
pub use shapes::{cube_side_labels, make_test_cube};

/// Indexed triangle mesh. Face order is the file order and is never changed.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh, rejecting out-of-range indices, repeated vertices within
    /// a face and zero-area faces.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (f, tri) in faces.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= nv) {
                return Err(FssError::InvalidFace {
                    face: f,
                    msg: format!("vertex index {bad} out of range (vertex count {nv})"),
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(FssError::InvalidFace {
                    face: f,
                    msg: format!("repeated vertex in {tri:?}"),
                });
            }
        }
        let mesh = TriMesh { vertices, faces };
        for f in 0..mesh.n_faces() {
            if mesh.is_degenerate(f) {
                return Err(FssError::DegenerateFace { face: f });
            }
        }
        Ok(mesh)
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn corners(&self, f: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    fn cross(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(f);
        (b - a).cross(&(c - a))
    }

    fn is_degenerate(&self, f: usize) -> bool {
        let [a, b, c] = self.corners(f);
        let scale = (b - a)
            .norm_squared()
            .max((c - b).norm_squared())
            .max((a - c).norm_squared());
        let cross = self.cross(f).norm();
        !(cross > 1e-14 * scale) || !cross.is_finite()
    }

    /// Applies a point map to every vertex (face order unchanged).
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Result<TriMesh> {
        TriMesh::new(self.vertices.iter().map(f).collect(), self.faces.clone())
    }

    /// Faces incident to each undirected edge, keyed by `(min, max)` vertex index.
    /// Each face list is in ascending face order.
    pub fn edge_faces(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(self.faces.len() * 2);
        for (f, tri) in self.faces.iter().enumerate() {
            for e in 0..3 {
                let key = edge_key(tri[e], tri[(e + 1) % 3]);
                let list = map.entry(key).or_default();
                if list.last() != Some(&f) {
                    list.push(f);
                }
            }
        }
        map
    }

    /// Checks that every edge is shared by exactly two faces.
    pub fn check_watertight(&self) -> Result<()> {
        let map = self.edge_faces();
        for tri in &self.faces {
            for e in 0..3 {
                let key = edge_key(tri[e], tri[(e + 1) % 3]);
                let count = map[&key].len();
                if count != 2 {
                    return Err(FssError::OpenMesh { a: key.0, b: key.1, count });
                }
            }
        }
        Ok(())
    }

    pub fn is_watertight(&self) -> bool {
        self.check_watertight().is_ok()
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Loads a mesh in the given format (or guessed from the extension).
pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriMesh> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path).ok_or_else(|| {
            FssError::InvalidParameter(format!("cannot infer mesh format of {}", path.display()))
        })?,
    };
    let text = std::fs::read_to_string(path)?;
    match format {
        MeshFormat::Off => read_off(&text),
        MeshFormat::Obj => read_obj(&text),
        MeshFormat::Ply => read_ply(&text),
    }
}

/// Per-face unit normals, barycenters and areas.
#[derive(Clone, Debug)]
pub struct FaceGeometry {
    pub normals: Vec<Vector3<f64>>,
    pub barycenters: Vec<Point3<f64>>,
    pub areas: Vec<f64>,
}

/// Normals follow the right-hand rule on the stored vertex order.
pub fn face_geometry(mesh: &TriMesh) -> Result<FaceGeometry> {
    let n = mesh.n_faces();
    let mut normals = Vec::with_capacity(n);
    let mut barycenters = Vec::with_capacity(n);
    let mut areas = Vec::with_capacity(n);
    for f in 0..n {
        let cross = mesh.cross(f);
        let len = cross.norm();
        if !(len > 0.0) {
            return Err(FssError::DegenerateFace { face: f });
        }
        let [a, b, c] = mesh.corners(f);
        normals.push(cross / len);
        barycenters.push(Point3::from((a.coords + b.coords + c.coords) / 3.0));
        areas.push(0.5 * len);
    }
    Ok(FaceGeometry { normals, barycenters, areas })
}

/// What to do with edges shared by more than two faces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ManifoldPolicy {
    #[default]
    Reject,
    /// Keep the first two faces (in face order) of every over-shared edge.
    KeepFirstTwo,
}

/// A face adjacent to another through the shared mesh edge `edge`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub face: usize,
    pub edge: [usize; 2],
}

/// Symmetric face adjacency: faces are adjacent iff they share a mesh edge.
#[derive(Clone, Debug)]
pub struct FaceAdjacency {
    lists: Vec<Vec<Neighbor>>,
}

impl FaceAdjacency {
    pub fn neighbors(&self, f: usize) -> &[Neighbor] {
        &self.lists[f]
    }

    pub fn n_faces(&self) -> usize {
        self.lists.len()
    }

    pub fn shared_edge(&self, i: usize, j: usize) -> Option<[usize; 2]> {
        self.lists[i].iter().find(|nb| nb.face == j).map(|nb| nb.edge)
    }

    /// Number of undirected face pairs.
    pub fn n_pairs(&self) -> usize {
        self.lists.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Number of connected components of the dual graph.
    pub fn components(&self) -> usize {
        let n = self.lists.len();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for nb in &self.lists[u] {
                    if !seen[nb.face] {
                        seen[nb.face] = true;
                        stack.push(nb.face);
                    }
                }
            }
        }
        count
    }
}

pub fn face_adjacency(mesh: &TriMesh, policy: ManifoldPolicy) -> Result<FaceAdjacency> {
    let edges = mesh.edge_faces();
    let mut lists = vec![Vec::new(); mesh.n_faces()];
    for (f, tri) in mesh.faces().iter().enumerate() {
        for e in 0..3 {
            let key = edge_key(tri[e], tri[(e + 1) % 3]);
            let faces = &edges[&key];
            if faces.len() > 2 && policy == ManifoldPolicy::Reject {
                return Err(FssError::NonManifoldEdge { a: key.0, b: key.1, count: faces.len() });
            }
            // Each pair is emitted once, when visiting its first face.
            if faces.len() < 2 || faces[0] != f {
                continue;
            }
            let g = faces[1];
            if lists[f].iter().any(|nb: &Neighbor| nb.face == g) {
                continue;
            }
            let edge = [key.0, key.1];
            lists[f].push(Neighbor { face: g, edge });
            lists[g].push(Neighbor { face: f, edge });
        }
    }
    Ok(FaceAdjacency { lists })
}

/// A validated mesh bundled with the derived per-face data every metric needs.
#[derive(Clone, Debug)]
pub struct PreparedMesh {
    pub mesh: TriMesh,
    pub geometry: FaceGeometry,
    pub adjacency: FaceAdjacency,
}

impl PreparedMesh {
    pub fn new(mesh: TriMesh, policy: ManifoldPolicy) -> Result<Self> {
        let geometry = face_geometry(&mesh)?;
        let adjacency = face_adjacency(&mesh, policy)?;
        Ok(PreparedMesh { mesh, geometry, adjacency })
    }

    pub fn n_faces(&self) -> usize {
        self.mesh.n_faces()
    }
}

/// Deterministic palette of `n` evenly spaced hues.
pub fn palette(n: usize) -> Vec<[u8; 3]> {
    (0..n)
        .map(|i| hsv_to_rgb(i as f64 / n.max(1) as f64, 0.75, 0.95))
        .collect()
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = (h.fract() * 6.0).max(0.0);
    let sector = h6.floor() as usize % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let to_u8 = |x: f64| (x * 255.0).round().clamp(0.0, 255.0) as u8;
    [to_u8(r), to_u8(g), to_u8(b)]
}

/// Writes the mesh as ASCII PLY with one palette color per cluster.
pub fn export_colored_mesh(
    mesh: &TriMesh,
    seg: &Segmentation,
    path: impl AsRef<Path>,
) -> Result<()> {
    if seg.len() != mesh.n_faces() {
        return Err(FssError::LengthMismatch { expected: mesh.n_faces(), got: seg.len() });
    }
    let colors = palette(seg.n_clusters());
    let face_colors: Vec<[u8; 3]> = seg.labels().iter().map(|&l| colors[l - 1]).collect();
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_colored_ply(&mut out, mesh, &face_colors)?;
    Ok(())
}
