//! The end-to-end segmentation pipeline.

use serde::{Deserialize, Serialize};

use crate::affinity::{build_wk, normalize_rows, AffinitySample, Kernel};
use crate::cluster::{kmeans_cosine, KMeansConfig, Segmentation};
use crate::error::{FssError, Result};
use crate::mesh_io::PreparedMesh;
use crate::metric_graph::{build_dual_graph, DualGraph, Metric};
use crate::sampler::{sample_epsilon, sample_fixed_k, FirstFace};

/// How many columns to sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum Sampling {
    /// `k = floor(fraction * n)`, at least 2.
    Fraction(f64),
    Fixed(usize),
    /// Stop once `beta_k / beta_1 < epsilon`.
    Epsilon(f64),
}

impl Sampling {
    /// Sample size for fixed modes; `None` for the epsilon rule.
    pub fn fixed_size(self, n: usize) -> Result<Option<usize>> {
        match self {
            Sampling::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(FssError::InvalidParameter(format!("fraction must lie in (0, 1], got {f}")));
                }
                Ok(Some(((f * n as f64).floor() as usize).max(2).min(n)))
            }
            Sampling::Fixed(k) => Ok(Some(k)),
            Sampling::Epsilon(_) => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub n_clusters: usize,
    pub sampling: Sampling,
    pub first_face: FirstFace,
    pub kmeans: KMeansConfig,
    pub kernel: Kernel,
}

impl SegmentConfig {
    pub fn new(n_clusters: usize, sampling: Sampling) -> Self {
        SegmentConfig {
            n_clusters,
            sampling,
            first_face: FirstFace::Random { seed: 0 },
            kmeans: KMeansConfig::default(),
            kernel: Kernel::default(),
        }
    }

    /// Sets both named seeds.
    pub fn with_seeds(mut self, sampling_seed: u64, kmeans_seed: u64) -> Self {
        self.first_face = FirstFace::Random { seed: sampling_seed };
        self.kmeans.seed = kmeans_seed;
        self
    }
}

#[derive(Clone, Debug)]
pub struct SegmentOutput {
    pub segmentation: Segmentation,
    /// Row-normalized `W^k` together with its sample.
    pub affinity: AffinitySample,
    /// Shortest-path queries issued by this run.
    pub sssp_calls: usize,
}

impl SegmentOutput {
    pub fn k(&self) -> usize {
        self.affinity.sample.k()
    }

    pub fn sigma_k(&self) -> f64 {
        self.affinity.sigma_k
    }

    pub fn betas(&self) -> &[f64] {
        &self.affinity.sample.betas
    }

    pub fn sample_indices(&self) -> &[usize] {
        &self.affinity.sample.indices
    }
}

/// Sample, kernel, normalize and cluster on an already built graph.
pub fn segment_graph(graph: &DualGraph, cfg: &SegmentConfig) -> Result<SegmentOutput> {
    let n = graph.n();
    let before = graph.sssp_calls();
    let sample = match cfg.sampling.fixed_size(n)? {
        Some(k) => sample_fixed_k(graph, k, cfg.first_face)?,
        None => {
            let Sampling::Epsilon(e) = cfg.sampling else { unreachable!() };
            sample_epsilon(graph, e, cfg.first_face)?
        }
    };
    let sssp_calls = graph.sssp_calls() - before;
    let affinity = normalize_rows(build_wk(sample, cfg.kernel)?);
    let segmentation = kmeans_cosine(&affinity.wk, cfg.n_clusters, &cfg.kmeans)?;
    Ok(SegmentOutput { segmentation, affinity, sssp_calls })
}

/// Builds the dual graph for `metric` and runs [`segment_graph`].
pub fn segment(pm: &PreparedMesh, metric: &Metric, cfg: &SegmentConfig) -> Result<SegmentOutput> {
    let graph = build_dual_graph(pm, metric)?;
    segment_graph(&graph, cfg)
}
