//! Farthest-point sampling of faces in the dual-graph metric.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FssError, Result};
use crate::metric_graph::DualGraph;

/// How the first sampled face is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FirstFace {
    Index(usize),
    /// Uniform draw from a seeded generator.
    Random { seed: u64 },
}

impl FirstFace {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            FirstFace::Index(i) if i < n => Ok(i),
            FirstFace::Index(i) => Err(FssError::InvalidParameter(format!("first face {i} out of range for {n} faces"))),
            FirstFace::Random { seed } => Ok(ChaCha8Rng::seed_from_u64(seed).random_range(0..n)),
        }
    }
}

/// Ordered farthest-point sample.
///
/// Column `l` of `distances` holds the graph distances of every face to face
/// `indices[l]`, and `betas[l]` is the largest distance from any face to its
/// nearest sampled face after `l + 1` steps.
#[derive(Clone, Debug)]
pub struct FarthestSample {
    pub indices: Vec<usize>,
    pub distances: DMatrix<f64>,
    pub betas: Vec<f64>,
}

impl FarthestSample {
    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn n(&self) -> usize {
        self.distances.nrows()
    }

    /// First `k` steps of this sample; identical to sampling `k` faces from
    /// the same start.
    pub fn truncated(&self, k: usize) -> FarthestSample {
        let k = k.min(self.k());
        FarthestSample {
            indices: self.indices[..k].to_vec(),
            distances: self.distances.columns(0, k).into_owned(),
            betas: self.betas[..k].to_vec(),
        }
    }
}

/// Greedy max-min selection, one shortest-path query per step.
struct Sampler<'g> {
    graph: &'g DualGraph,
    columns: Vec<Vec<f64>>,
    indices: Vec<usize>,
    betas: Vec<f64>,
    // Running minimum over the selected columns.
    nearest: Vec<f64>,
    next: usize,
}

impl<'g> Sampler<'g> {
    fn new(graph: &'g DualGraph, first: usize) -> Self {
        Sampler {
            graph,
            columns: Vec::new(),
            indices: Vec::new(),
            betas: Vec::new(),
            nearest: vec![f64::INFINITY; graph.n()],
            next: first,
        }
    }

    /// Adds column `next`, updates beta and picks the following face. Ties in
    /// the argmax go to the smallest face index.
    fn step(&mut self) -> Result<f64> {
        let j = self.next;
        let col = self.graph.sssp(j)?;
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, (m, &d)) in self.nearest.iter_mut().zip(&col).enumerate() {
            if d < *m {
                *m = d;
            }
            if *m > best.0 {
                best = (*m, i);
            }
        }
        self.indices.push(j);
        self.columns.push(col);
        self.betas.push(best.0);
        self.next = best.1;
        Ok(best.0)
    }

    fn finish(self) -> FarthestSample {
        let n = self.graph.n();
        let k = self.columns.len();
        let distances = DMatrix::from_iterator(n, k, self.columns.into_iter().flatten());
        FarthestSample { indices: self.indices, distances, betas: self.betas }
    }
}

/// Samples exactly `k` faces.
pub fn sample_fixed_k(graph: &DualGraph, k: usize, first: FirstFace) -> Result<FarthestSample> {
    let n = graph.n();
    if k == 0 || k > n {
        return Err(FssError::InvalidParameter(format!("sample size {k} must lie in 1..={n}")));
    }
    let mut s = Sampler::new(graph, first.resolve(n)?);
    for _ in 0..k {
        s.step()?;
    }
    Ok(s.finish())
}

/// Samples until `beta_l / beta_1 < epsilon` for some `l >= 2`, or all faces
/// are taken.
pub fn sample_epsilon(graph: &DualGraph, epsilon: f64, first: FirstFace) -> Result<FarthestSample> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(FssError::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let n = graph.n();
    let mut s = Sampler::new(graph, first.resolve(n)?);
    let beta1 = s.step()?;
    while s.indices.len() < n {
        let beta = s.step()?;
        if beta < epsilon * beta1 {
            break;
        }
    }
    Ok(s.finish())
}

/// Normalized beta curve `(l, beta_l / beta_1)` for `l = 1..=k`.
pub fn beta_curve(sample: &FarthestSample) -> Vec<(usize, f64)> {
    let b1 = sample.betas[0];
    sample
        .betas
        .iter()
        .enumerate()
        .map(|(l, &b)| (l + 1, if b1 > 0.0 { b / b1 } else { 0.0 }))
        .collect()
}

/// First `l` at which the normalized beta curve drops by less than
/// `slope_tol` in one step; a heuristic for where the curve flattens.
pub fn flat_beta_step(sample: &FarthestSample, slope_tol: f64) -> Option<usize> {
    let curve = beta_curve(sample);
    curve.windows(2).find(|w| w[0].1 - w[1].1 < slope_tol).map(|w| w[1].0)
}
