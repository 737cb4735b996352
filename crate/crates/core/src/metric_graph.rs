//! Face metrics and the weighted dual graph.
//!
//! Adjacent faces get a per-metric distance; all other pairs are at the
//! shortest-path distance in the dual graph. Edge weights are snapped to a
//! dyadic grid fine enough that every shortest-path sum is computed without
//! rounding, so path lengths are exact sums of stored weights: Dijkstra from
//! `i` and from `j` agree bit for bit and the triangle inequality holds
//! exactly in floating point.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FssError, Result};
use crate::mesh_io::PreparedMesh;
use crate::par;

/// Relative size of the weight substituted for zero edge distances.
pub const EPSILON_FLOOR_FACTOR: f64 = 1e-8;

pub const DEFAULT_ETA_CONVEX: f64 = 0.1;

/// Per-edge face distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Metric {
    /// `eta * (1 - <n_i, n_j>)`, with `eta = 1` across concave edges and
    /// `eta_convex` across convex ones.
    Angular { eta_convex: f64 },
    /// Unfolded barycenter distance across the shared edge.
    Geodesic,
    /// `|sdf_i - sdf_j|` for the given per-face shape diameter values.
    Sdf { values: Vec<f64> },
    /// Geodesic times angular distance, composed per edge.
    Product { eta_convex: f64 },
}

impl Metric {
    pub fn angular() -> Self {
        Metric::Angular { eta_convex: DEFAULT_ETA_CONVEX }
    }

    pub fn product() -> Self {
        Metric::Product { eta_convex: DEFAULT_ETA_CONVEX }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Angular { .. } => "angular",
            Metric::Geodesic => "geodesic",
            Metric::Sdf { .. } => "sdf",
            Metric::Product { .. } => "product",
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Metric::Angular { eta_convex } | Metric::Product { eta_convex } => {
                if !(*eta_convex > 0.0 && *eta_convex <= 1.0) {
                    return Err(FssError::InvalidParameter(format!("eta_convex must lie in (0, 1], got {eta_convex}")));
                }
            }
            Metric::Sdf { values } => {
                if values.len() != n {
                    return Err(FssError::LengthMismatch { expected: n, got: values.len() });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(FssError::InvalidParameter("sdf values must be finite".into()));
                }
            }
            Metric::Geodesic => {}
        }
        Ok(())
    }
}

fn require_adjacent(pm: &PreparedMesh, i: usize, j: usize) -> Result<[usize; 2]> {
    if i >= pm.n_faces() || j >= pm.n_faces() {
        return Err(FssError::NotAdjacent { i, j });
    }
    pm.adjacency.shared_edge(i, j).ok_or(FssError::NotAdjacent { i, j })
}

/// The fold at the shared edge is concave when the barycenter of `j` lies on
/// the positive side of the plane of `i`.
pub fn is_concave(pm: &PreparedMesh, i: usize, j: usize) -> bool {
    let g = &pm.geometry;
    (g.barycenters[j] - g.barycenters[i]).dot(&g.normals[i]) > 0.0
}

pub fn angular_edge_distance(pm: &PreparedMesh, i: usize, j: usize, eta_convex: f64) -> Result<f64> {
    require_adjacent(pm, i, j)?;
    let g = &pm.geometry;
    let cos = g.normals[i].dot(&g.normals[j]).clamp(-1.0, 1.0);
    let eta = if is_concave(pm, i, j) { 1.0 } else { eta_convex };
    Ok(eta * (1.0 - cos))
}

/// Length of the shortest path between the barycenters of two adjacent faces
/// crossing their shared edge: face `j` is unfolded about the edge into the
/// plane of face `i`.
pub fn geodesic_edge_distance(pm: &PreparedMesh, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Ok(0.0);
    }
    let [a, b] = require_adjacent(pm, i, j)?;
    let p = pm.mesh.vertices()[a];
    let axis = (pm.mesh.vertices()[b] - p).normalize();
    // Along-edge coordinate and distance from the edge line of each barycenter.
    let coords = |f: usize| {
        let d = pm.geometry.barycenters[f] - p;
        let s = d.dot(&axis);
        (s, (d - axis * s).norm())
    };
    let (si, hi) = coords(i);
    let (sj, hj) = coords(j);
    Ok((si - sj).hypot(hi + hj))
}

pub fn sdf_edge_distance(values: &[f64], i: usize, j: usize) -> f64 {
    (values[i] - values[j]).abs()
}

fn edge_distance(pm: &PreparedMesh, metric: &Metric, i: usize, j: usize) -> Result<f64> {
    match metric {
        Metric::Angular { eta_convex } => angular_edge_distance(pm, i, j, *eta_convex),
        Metric::Geodesic => geodesic_edge_distance(pm, i, j),
        Metric::Sdf { values } => {
            require_adjacent(pm, i, j)?;
            Ok(sdf_edge_distance(values, i, j))
        }
        Metric::Product { eta_convex } => {
            Ok(geodesic_edge_distance(pm, i, j)? * angular_edge_distance(pm, i, j, *eta_convex)?)
        }
    }
}

/// Weighted face-adjacency graph in compressed sparse row form.
#[derive(Debug)]
pub struct DualGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    epsilon_floor: f64,
    quantum: f64,
    sssp_calls: AtomicUsize,
}

impl Clone for DualGraph {
    fn clone(&self) -> Self {
        DualGraph {
            offsets: self.offsets.clone(),
            targets: self.targets.clone(),
            weights: self.weights.clone(),
            epsilon_floor: self.epsilon_floor,
            quantum: self.quantum,
            sssp_calls: AtomicUsize::new(self.sssp_calls()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance.
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl DualGraph {
    /// Builds a graph from undirected weighted edges. Zero weights are
    /// replaced by the epsilon floor; all weights are then rounded to a
    /// multiple of [`DualGraph::quantum`], which makes path sums exact.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(FssError::InvalidParameter(format!("bad edge ({i}, {j}) for {n} nodes")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(FssError::InvalidParameter(format!("edge ({i}, {j}) has invalid weight {w}")));
            }
        }
        let positive: Vec<f64> = edges.iter().map(|e| e.2).filter(|&w| w > 0.0).collect();
        let epsilon_floor = if positive.is_empty() {
            EPSILON_FLOOR_FACTOR
        } else {
            EPSILON_FLOOR_FACTOR * positive.iter().sum::<f64>() / positive.len() as f64
        };
        let floored: Vec<f64> = edges.iter().map(|e| if e.2 > 0.0 { e.2 } else { epsilon_floor }).collect();

        // Any simple path is at most the total weight, so every partial sum
        // of a shortest path is an integer multiple of `quantum` below 2^53.
        let total: f64 = floored.iter().sum();
        let quantum = if total > 0.0 { 2f64.powi(total.log2().floor() as i32 + 1 - 52) } else { 1.0 };
        let snap = |w: f64| (w / quantum).round().max(1.0) * quantum;

        let mut degree = vec![0usize; n + 1];
        for &(i, j, _) in edges {
            degree[i + 1] += 1;
            degree[j + 1] += 1;
        }
        for k in 0..n {
            degree[k + 1] += degree[k];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; offsets[n]];
        let mut weights = vec![0f64; offsets[n]];
        for (&(i, j, _), &w) in edges.iter().zip(&floored) {
            let w = snap(w);
            targets[fill[i]] = j;
            weights[fill[i]] = w;
            fill[i] += 1;
            targets[fill[j]] = i;
            weights[fill[j]] = w;
            fill[j] += 1;
        }
        Ok(DualGraph { offsets, targets, weights, epsilon_floor, quantum, sssp_calls: AtomicUsize::new(0) })
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn epsilon_floor(&self) -> f64 {
        self.epsilon_floor
    }

    /// Grid step of the stored weights, about `2^-52` times their total.
    /// Each weight differs from its floored value by at most half a step.
    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.neighbors(i).find(|&(t, _)| t == j).map(|(_, w)| w)
    }

    /// Undirected edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n())
            .flat_map(|i| self.neighbors(i).filter(move |&(j, _)| i < j).map(move |(j, w)| (i, j, w)))
            .collect()
    }

    pub fn components(&self) -> usize {
        let n = self.n();
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
                for (v, _) in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    pub fn require_connected(&self) -> Result<()> {
        match self.components() {
            0 | 1 => Ok(()),
            components => Err(FssError::Disconnected { components }),
        }
    }

    /// Number of single-source shortest-path queries answered so far.
    pub fn sssp_calls(&self) -> usize {
        self.sssp_calls.load(AtomicOrdering::Relaxed)
    }

    pub fn reset_sssp_calls(&self) {
        self.sssp_calls.store(0, AtomicOrdering::Relaxed);
    }

    /// Dijkstra with a binary heap and lazy deletion.
    pub fn sssp(&self, source: usize) -> Result<Vec<f64>> {
        let n = self.n();
        if source >= n {
            return Err(FssError::InvalidParameter(format!("source {source} out of range")));
        }
        self.sssp_calls.fetch_add(1, AtomicOrdering::Relaxed);
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::with_capacity(n);
        dist[source] = 0.0;
        heap.push(HeapEntry { dist: 0.0, node: source });
        while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for (v, w) in self.neighbors(u) {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(HeapEntry { dist: nd, node: v });
                }
            }
        }
        if let Some(node) = dist.iter().position(|d| d.is_infinite()) {
            return Err(FssError::Unreachable { source_face: source, node });
        }
        Ok(dist)
    }

    /// Full `n x n` distance matrix, one shortest-path query per row.
    pub fn all_pairs(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let rows = par::map_range(n, |s| self.sssp(s));
        let mut d = DMatrix::zeros(n, n);
        for (s, row) in rows.into_iter().enumerate() {
            let row = row?;
            for (t, v) in row.into_iter().enumerate() {
                d[(s, t)] = v;
            }
        }
        Ok(d)
    }

    /// CSV edge list `i,j,weight`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "i,j,weight")?;
        for (i, j, w) in self.edges() {
            writeln!(out, "{i},{j},{w:e}")?;
        }
        out.flush()
    }
}

/// One arc per interior mesh edge weighted by `metric`; rejects disconnected
/// dual graphs.
pub fn build_dual_graph(pm: &PreparedMesh, metric: &Metric) -> Result<DualGraph> {
    let n = pm.n_faces();
    metric.validate(n)?;
    let mut edges = Vec::with_capacity(pm.adjacency.n_pairs());
    for i in 0..n {
        for nb in pm.adjacency.neighbors(i) {
            if i < nb.face {
                edges.push((i, nb.face, edge_distance(pm, metric, i, nb.face)?));
            }
        }
    }
    let graph = DualGraph::from_edges(n, &edges)?;
    graph.require_connected()?;
    Ok(graph)
}
