//! Gaussian-kernel affinities from face distances.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FssError, Result};
use crate::metric_graph::DualGraph;
use crate::sampler::FarthestSample;

/// Default limit on `n` for materializing the full `n x n` affinity matrix.
pub const FULL_AFFINITY_LIMIT: usize = 20_000;

/// Kernel applied to a distance `d` with normalization `sigma`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-d / (2 sigma^2))`, with `d` the distance itself.
    #[default]
    Distance,
    /// `exp(-d^2 / (2 sigma^2))`.
    Squared,
}

impl Kernel {
    #[inline]
    pub fn eval(self, d: f64, sigma: f64) -> f64 {
        let two_s2 = 2.0 * sigma * sigma;
        match self {
            Kernel::Distance => (-d / two_s2).exp(),
            Kernel::Squared => (-d * d / two_s2).exp(),
        }
    }
}

/// Mean of all entries. Each row is summed in sorted order so the result is
/// invariant under column permutations (a full farthest sample is a column
/// permutation of the distance matrix).
pub fn mean_entry(m: &DMatrix<f64>) -> f64 {
    let (n, k) = m.shape();
    if n == 0 || k == 0 {
        return 0.0;
    }
    let mut row = Vec::with_capacity(k);
    let mut total = 0.0;
    for i in 0..n {
        row.clear();
        row.extend(m.row(i).iter().copied());
        row.sort_by(f64::total_cmp);
        total += row.iter().sum::<f64>();
    }
    total / (n as f64 * k as f64)
}

/// The `n x k` sampled affinity block.
#[derive(Clone, Debug)]
pub struct AffinitySample {
    pub wk: DMatrix<f64>,
    pub sigma_k: f64,
    pub kernel: Kernel,
    pub row_normalized: bool,
    pub sample: FarthestSample,
}

pub fn build_wk(sample: FarthestSample, kernel: Kernel) -> Result<AffinitySample> {
    if sample.distances.iter().any(|x| !x.is_finite()) {
        return Err(FssError::InvalidParameter("sampled distances must be finite".into()));
    }
    let sigma_k = mean_entry(&sample.distances);
    if !(sigma_k > 0.0) {
        return Err(FssError::ZeroSigma);
    }
    let wk = sample.distances.map(|x| kernel.eval(x, sigma_k));
    Ok(AffinitySample { wk, sigma_k, kernel, row_normalized: false, sample })
}

/// Scales every row of `W^k` to unit Euclidean norm.
pub fn normalize_rows(mut aff: AffinitySample) -> AffinitySample {
    normalize_matrix_rows(&mut aff.wk);
    aff.row_normalized = true;
    aff
}

pub(crate) fn normalize_matrix_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

impl AffinitySample {
    /// Little-endian dump: `u64 n`, `u64 k`, then `n * k` `f64` in row-major order.
    pub fn write_binary<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let (n, k) = self.wk.shape();
        out.write_all(&(n as u64).to_le_bytes())?;
        out.write_all(&(k as u64).to_le_bytes())?;
        for i in 0..n {
            for j in 0..k {
                out.write_all(&self.wk[(i, j)].to_le_bytes())?;
            }
        }
        out.flush()
    }
}

/// The full `n x n` affinity matrix and the distances it was built from.
#[derive(Clone, Debug)]
pub struct FullAffinity {
    pub w: DMatrix<f64>,
    pub sigma: f64,
    pub distances: DMatrix<f64>,
}

impl FullAffinity {
    pub fn from_distances(distances: DMatrix<f64>, kernel: Kernel) -> Self {
        let sigma = mean_entry(&distances);
        let w = if sigma > 0.0 {
            distances.map(|d| kernel.eval(d, sigma))
        } else {
            DMatrix::from_element(distances.nrows(), distances.ncols(), 1.0)
        };
        FullAffinity { w, sigma, distances }
    }
}

/// Full affinity from all-pairs shortest paths (`n` queries).
pub fn build_full_w(graph: &DualGraph, kernel: Kernel, limit: usize) -> Result<FullAffinity> {
    let n = graph.n();
    if n > limit {
        return Err(FssError::SizeGuard { n, limit });
    }
    Ok(FullAffinity::from_distances(graph.all_pairs()?, kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_fixed_k, FirstFace};

    fn sample_from(x: DMatrix<f64>) -> FarthestSample {
        let k = x.ncols();
        FarthestSample { indices: (0..k).collect(), distances: x, betas: vec![0.0; k] }
    }

    #[test]
    fn kernel_values() {
        // Mean of [0, 2] is 1, so the second entry is exactly 2 sigma^2.
        let aff = build_wk(sample_from(DMatrix::from_column_slice(2, 1, &[0.0, 2.0])), Kernel::Distance).unwrap();
        assert_eq!(aff.sigma_k, 1.0);
        assert_eq!(aff.wk[(0, 0)], 1.0);
        assert!((aff.wk[(1, 0)] - (-1f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn zero_sigma() {
        let err = build_wk(sample_from(DMatrix::zeros(3, 1)), Kernel::Distance).unwrap_err();
        assert!(matches!(err, FssError::ZeroSigma));
    }

    #[test]
    fn path_graph_against_direct_formula() {
        let g = DualGraph::from_edges(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).unwrap();
        let s = sample_fixed_k(&g, 3, FirstFace::Index(0)).unwrap();
        let aff = build_wk(s, Kernel::Distance).unwrap();
        // Columns from faces 0, 4, 2.
        let x = [[0.0, 4.0, 2.0], [1.0, 3.0, 1.0], [2.0, 2.0, 0.0], [3.0, 1.0, 1.0], [4.0, 0.0, 2.0]];
        let sigma: f64 = x.iter().flatten().sum::<f64>() / 15.0;
        assert!((sigma - 26.0 / 15.0).abs() < 1e-15);
        assert!((aff.sigma_k - sigma).abs() < 1e-15);
        for i in 0..5 {
            for j in 0..3 {
                let w = (-x[i][j] / (2.0 * sigma * sigma)).exp();
                assert!((aff.wk[(i, j)] - w).abs() < 1e-15);
            }
        }
        for (l, &j) in aff.sample.indices.iter().enumerate() {
            assert_eq!(aff.wk[(j, l)], 1.0);
        }
    }

    #[test]
    fn row_normalization() {
        let aff = AffinitySample {
            wk: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.6, 0.8]),
            sigma_k: 1.0,
            kernel: Kernel::Distance,
            row_normalized: false,
            sample: sample_from(DMatrix::zeros(2, 2)),
        };
        let n = normalize_rows(aff);
        let r = 0.5f64.sqrt();
        assert!((n.wk[(0, 0)] - r).abs() < 1e-15 && (n.wk[(0, 1)] - r).abs() < 1e-15);
        // Already unit rows stay put.
        assert!((n.wk[(1, 0)] - 0.6).abs() < 1e-15 && (n.wk[(1, 1)] - 0.8).abs() < 1e-15);
        assert!(n.row_normalized);
    }

    #[test]
    fn full_w_trivial_and_guard() {
        let single = FullAffinity::from_distances(DMatrix::zeros(1, 1), Kernel::Distance);
        assert_eq!(single.w[(0, 0)], 1.0);
        let g = DualGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert!(matches!(build_full_w(&g, Kernel::Distance, 2), Err(FssError::SizeGuard { n: 3, limit: 2 })));
    }

    #[test]
    fn binary_dump_layout() {
        let aff = build_wk(sample_from(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])), Kernel::Distance).unwrap();
        let mut buf = Vec::new();
        aff.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 4 * 8);
        assert_eq!(u64::from_le_bytes(buf[0..8].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 2);
        let second = f64::from_le_bytes(buf[24..32].try_into().unwrap());
        assert_eq!(second, aff.wk[(0, 1)]);
    }

    #[test]
    fn mean_entry_ignores_column_order() {
        let a = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, 1e-17, 5.0, 0.7]);
        let b = DMatrix::from_row_slice(2, 3, &[0.3, 0.1, 0.2, 0.7, 1e-17, 5.0]);
        assert_eq!(mean_entry(&a), mean_entry(&b));
    }
}
