//! Pair-counting agreement between segmentations.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cluster::Segmentation;
use crate::error::{FssError, Result};
use crate::mesh_io::PreparedMesh;
use crate::metric_graph::{build_dual_graph, Metric};
use crate::par;
use crate::pipeline::{segment_graph, SegmentConfig, Sampling};

/// A published comparison against benchmark ground truth, kept only for
/// side-by-side printing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub model: &'static str,
    /// Benchmark mesh number.
    pub mesh_id: u32,
    pub metric: &'static str,
    /// Sampled columns.
    pub k: usize,
    pub d_rand: f64,
    pub d_jaccard: f64,
}

pub const REFERENCE_DISTANCES: [ReferenceRow; 3] = [
    ReferenceRow { model: "hand", mesh_id: 185, metric: "geodesic", k: 49, d_rand: 0.124, d_jaccard: 0.303 },
    ReferenceRow { model: "bearing", mesh_id: 341, metric: "angular", k: 16, d_rand: 0.033, d_jaccard: 0.452 },
    ReferenceRow { model: "octopus", mesh_id: 125, metric: "sdf", k: 53, d_rand: 0.043, d_jaccard: 0.105 },
];

/// Counts over all unordered face pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PairCounts {
    /// Same cluster in both.
    pub n11: u64,
    /// Separated in both.
    pub n00: u64,
    /// Same cluster in the first only.
    pub n10: u64,
    /// Same cluster in the second only.
    pub n01: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.n11 + self.n00 + self.n10 + self.n01
    }

    pub fn rand(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            1.0
        } else {
            (self.n11 + self.n00) as f64 / t as f64
        }
    }

    /// An empty denominator means neither segmentation co-clusters any
    /// pair, so they agree on every pair.
    pub fn jaccard(&self) -> f64 {
        let d = self.n11 + self.n10 + self.n01;
        if d == 0 {
            1.0
        } else {
            self.n11 as f64 / d as f64
        }
    }
}

fn pairs(m: u64) -> u64 {
    m * m.saturating_sub(1) / 2
}

fn check_lengths(a: &Segmentation, b: &Segmentation) -> Result<()> {
    if a.len() != b.len() {
        return Err(FssError::LengthMismatch { expected: a.len(), got: b.len() });
    }
    Ok(())
}

/// Pair counts from the contingency table.
pub fn pair_counts(a: &Segmentation, b: &Segmentation) -> Result<PairCounts> {
    check_lengths(a, b)?;
    let (ka, kb) = (a.n_clusters(), b.n_clusters());
    let mut table = vec![0u64; ka * kb];
    let mut row = vec![0u64; ka];
    let mut col = vec![0u64; kb];
    for (&la, &lb) in a.labels().iter().zip(b.labels()) {
        table[(la - 1) * kb + (lb - 1)] += 1;
        row[la - 1] += 1;
        col[lb - 1] += 1;
    }
    let n11: u64 = table.iter().map(|&c| pairs(c)).sum();
    let same_a: u64 = row.iter().map(|&c| pairs(c)).sum();
    let same_b: u64 = col.iter().map(|&c| pairs(c)).sum();
    let total = pairs(a.len() as u64);
    let (n10, n01) = (same_a - n11, same_b - n11);
    Ok(PairCounts { n11, n00: total - n11 - n10 - n01, n10, n01 })
}

/// Pair counts by enumerating every pair; quadratic, kept as a reference.
pub fn pair_counts_brute_force(a: &Segmentation, b: &Segmentation) -> Result<PairCounts> {
    check_lengths(a, b)?;
    let (la, lb) = (a.labels(), b.labels());
    let mut c = PairCounts::default();
    for i in 0..la.len() {
        for j in i + 1..la.len() {
            match (la[i] == la[j], lb[i] == lb[j]) {
                (true, true) => c.n11 += 1,
                (false, false) => c.n00 += 1,
                (true, false) => c.n10 += 1,
                (false, true) => c.n01 += 1,
            }
        }
    }
    Ok(c)
}

pub fn rand_index(a: &Segmentation, b: &Segmentation) -> Result<f64> {
    Ok(pair_counts(a, b)?.rand())
}

pub fn jaccard_index(a: &Segmentation, b: &Segmentation) -> Result<f64> {
    Ok(pair_counts(a, b)?.jaccard())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Rand,
    Jaccard,
}

/// One minus the chosen index.
pub fn seg_distance(a: &Segmentation, b: &Segmentation, kind: DistanceKind) -> Result<f64> {
    let c = pair_counts(a, b)?;
    Ok(match kind {
        DistanceKind::Rand => 1.0 - c.rand(),
        DistanceKind::Jaccard => 1.0 - c.jaccard(),
    })
}

/// Rand distances of sampled runs against one full-matrix run.
#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyHistogram {
    pub fractions: Vec<f64>,
    /// `distances[f][t]` for fraction `f` and trial `t`.
    pub distances: Vec<Vec<f64>>,
    pub bins: usize,
}

impl ConsistencyHistogram {
    /// Relative frequencies over `bins` equal bins of `[0, 1]`.
    pub fn frequencies(&self, fraction_idx: usize) -> Vec<f64> {
        let d = &self.distances[fraction_idx];
        let mut counts = vec![0usize; self.bins];
        for &x in d {
            let b = ((x * self.bins as f64) as usize).min(self.bins - 1);
            counts[b] += 1;
        }
        counts.iter().map(|&c| c as f64 / d.len().max(1) as f64).collect()
    }

    /// Columns `fraction,bin_lo,bin_hi,rel_freq`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "fraction,bin_lo,bin_hi,rel_freq")?;
        let w = 1.0 / self.bins as f64;
        for (fi, f) in self.fractions.iter().enumerate() {
            for (b, r) in self.frequencies(fi).iter().enumerate() {
                writeln!(out, "{f},{},{},{r}", b as f64 * w, (b + 1) as f64 * w)?;
            }
        }
        Ok(())
    }
}

/// For every fraction and trial, segments with per-trial seeds and measures
/// the Rand distance to the segmentation built from all columns.
pub fn consistency_histogram(
    pm: &PreparedMesh,
    metric: &Metric,
    base: &SegmentConfig,
    fractions: &[f64],
    trials: usize,
    bins: usize,
) -> Result<ConsistencyHistogram> {
    if bins == 0 || trials == 0 {
        return Err(FssError::InvalidParameter("bins and trials must be positive".into()));
    }
    let graph = build_dual_graph(pm, metric)?;
    let full_cfg = SegmentConfig { sampling: Sampling::Fixed(graph.n()), ..base.clone() };
    let full = segment_graph(&graph, &full_cfg)?.segmentation;
    let mut distances = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let runs = par::map_range(trials, |t| {
            let seed = base.kmeans.seed.wrapping_add(t as u64 + 1);
            let cfg = SegmentConfig { sampling: Sampling::Fraction(f), ..base.clone() }.with_seeds(seed, seed);
            segment_graph(&graph, &cfg).and_then(|o| seg_distance(&o.segmentation, &full, DistanceKind::Rand))
        });
        distances.push(runs.into_iter().collect::<Result<Vec<_>>>()?);
    }
    Ok(ConsistencyHistogram { fractions: fractions.to_vec(), distances, bins })
}
