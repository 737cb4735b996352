#![allow(dead_code)]

use fss_core::mesh_io::shapes::{make_box, make_cylinder, voxel_block, voxel_surface};
use fss_core::mesh_io::{ManifoldPolicy, PreparedMesh, TriMesh};
use fss_core::{DualGraph, FarthestSample};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn prepared(mesh: TriMesh) -> PreparedMesh {
    PreparedMesh::new(mesh, ManifoldPolicy::Reject).unwrap()
}

/// Connected random graph: a random spanning tree plus `extra` chords.
/// About one weight in eight is zero, to exercise the floor.
pub fn random_graph(n: usize, extra: usize, seed: u64) -> DualGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let weight = |rng: &mut ChaCha8Rng| if rng.random_range(0..8) == 0 { 0.0 } else { rng.random::<f64>() * 3.0 };
    for v in 1..n {
        let u = rng.random_range(0..v);
        seen.insert((u, v));
        let w = weight(&mut rng);
        edges.push((u, v, w));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let (a, b) = (a.min(b), a.max(b));
        if a != b && seen.insert((a, b)) {
            let w = weight(&mut rng);
            edges.push((a, b, w));
        }
    }
    DualGraph::from_edges(n, &edges).unwrap()
}

/// All-pairs distances by Floyd-Warshall over the stored weights.
pub fn floyd_warshall(g: &DualGraph) -> DMatrix<f64> {
    let n = g.n();
    let mut d = DMatrix::from_element(n, n, f64::INFINITY);
    for i in 0..n {
        d[(i, i)] = 0.0;
    }
    for (i, j, w) in g.edges() {
        if w < d[(i, j)] {
            d[(i, j)] = w;
            d[(j, i)] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[(i, k)] + d[(k, j)];
                if via < d[(i, j)] {
                    d[(i, j)] = via;
                }
            }
        }
    }
    d
}

/// `beta_l = max_i min_{r <= l} X[i, r]`, recomputed from scratch per `l`.
pub fn brute_betas(s: &FarthestSample) -> Vec<f64> {
    let x = &s.distances;
    (0..s.k())
        .map(|l| {
            (0..x.nrows())
                .map(|i| (0..=l).map(|r| x[(i, r)]).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Long box, 4 x 1 x 1.
pub fn long_box(cells: usize) -> TriMesh {
    make_box([4.0, 1.0, 1.0], [4 * cells, cells, cells])
}

/// L-shaped prism with two arms of length 4 and unit square cross-section,
/// voxelized at `res` voxels per unit.
pub fn l_prism(res: i64) -> TriMesh {
    let mut v = voxel_block([0, 0, 0], [4 * res, res, res]);
    v.extend(voxel_block([0, res, 0], [res, 3 * res, res]));
    voxel_surface(&v, 1.0 / res as f64)
}

pub fn capped_cylinder(segments: usize, rings: usize) -> TriMesh {
    make_cylinder(0.5, 3.0, segments, rings)
}

/// U-shaped prism: a base of length 4 with two arms of length 2 standing
/// on its ends, unit square cross-section, `res` voxels per unit.
pub fn u_prism(res: i64) -> TriMesh {
    let mut v = voxel_block([0, 0, 0], [4 * res, res, res]);
    v.extend(voxel_block([0, res, 0], [res, 2 * res, res]));
    v.extend(voxel_block([3 * res, res, 0], [res, 2 * res, res]));
    voxel_surface(&v, 1.0 / res as f64)
}
