//! Low-rank laboratory on the full affinity matrix.
//!
//! Compares four rank-`k` approximations of `W`: the truncated
//! eigendecomposition `E^k`, the projection `F^k` onto Nyström eigenvector
//! estimates, the projection `G^k` onto the top-leverage columns, and the
//! projection `H^k` onto the farthest-sample columns `W^k`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::affinity::{build_full_w, mean_entry, Kernel};
use crate::error::{FssError, Result};
use crate::metric_graph::DualGraph;
use crate::par;
use crate::sampler::{sample_fixed_k, FarthestSample, FirstFace};

/// Default limit on `n` for lab runs.
pub const LAB_LIMIT: usize = 5000;

fn rank_cutoff(rows: usize, cols: usize, max_sv: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * max_sv
}

/// Moore-Penrose pseudoinverse; singular values at or below
/// `max(rows, cols) * eps * sigma_max` count as zero.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.max();
    let tol = rank_cutoff(r, c, smax);
    let mut out = DMatrix::zeros(c, r);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            out += vt.row(i).transpose() * u.column(i).transpose() / s;
        }
    }
    out
}

/// Orthonormal basis of the column space, with the pseudoinverse rank cutoff.
pub fn column_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let svd = m.clone().svd(true, false);
    let u = svd.u.unwrap();
    let tol = rank_cutoff(r, c, svd.singular_values.max());
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol).collect();
    u.select_columns(keep.iter())
}

/// `C C^+`, the orthogonal projector onto the columns of `C`.
pub fn projector(c: &DMatrix<f64>) -> DMatrix<f64> {
    let u = column_basis(c);
    &u * u.transpose()
}

/// `C C^+ W`, computed as `U (U^t W)` with `U` an orthonormal column basis.
pub fn project_onto_columns(c: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let u = column_basis(c);
    &u * (u.transpose() * w)
}

/// Eigenpairs of a symmetric matrix ordered by decreasing `|lambda|`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn new(w: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(w.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()).then(a.cmp(&b)));
        Spectrum {
            values: DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i])),
            vectors: eig.eigenvectors.select_columns(order.iter()),
        }
    }

    /// Singular values of `W`.
    pub fn gammas(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.abs()).collect()
    }

    pub fn negative_count(&self) -> usize {
        self.values.iter().filter(|&&v| v < 0.0).count()
    }

    /// `||W - E^k||_F` from the discarded eigenvalues.
    pub fn tail_error(&self, k: usize) -> f64 {
        self.values.iter().skip(k).map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Leverage scores of the top-`k` singular directions.
    pub fn leverage(&self, k: usize) -> Vec<f64> {
        let v = self.vectors.columns(0, k);
        v.row_iter().map(|r| r.norm_squared() / k as f64).collect()
    }
}

/// `E^k = sum_{i<k} lambda_i u_i u_i^t` over the `k` eigenpairs of largest
/// magnitude: the best rank-`k` Frobenius approximation of a symmetric `W`.
pub fn best_rank_k(spectrum: &Spectrum, k: usize) -> DMatrix<f64> {
    let u = spectrum.vectors.columns(0, k);
    let scaled = DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, j)] * spectrum.values[j]);
    scaled * u.transpose()
}

/// Nyström eigenvector estimates and the induced approximation of `W`.
#[derive(Clone, Debug)]
pub struct Nystrom {
    /// `P^t N^k`, rows in the original face order.
    pub vectors: DMatrix<f64>,
    /// `F^k`.
    pub projection: DMatrix<f64>,
    /// `W_{:,S} A^+ W_{S,:}`.
    pub approximation: DMatrix<f64>,
    pub min_abs_eig: f64,
}

fn nystrom_impl(w: &DMatrix<f64>, sample: &[usize], strict: bool) -> Result<Nystrom> {
    let n = w.nrows();
    let k = sample.len();
    let mut in_sample = vec![None; n];
    for (l, &s) in sample.iter().enumerate() {
        if s >= n || in_sample[s].is_some() {
            return Err(FssError::InvalidParameter(format!("sample index {s} repeated or out of range")));
        }
        in_sample[s] = Some(l);
    }
    let a = w.select_rows(sample.iter()).select_columns(sample.iter());
    let eig = SymmetricEigen::new(a.clone());
    let max_abs = eig.eigenvalues.amax();
    let min_abs_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let tol = rank_cutoff(k, k, max_abs);
    if strict && min_abs_eig <= tol {
        return Err(FssError::SingularBlock { min_abs_eig });
    }
    let keep: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i].abs() > tol).collect();
    let ua = eig.eigenvectors.select_columns(keep.iter());
    let inv_lambda = DMatrix::from_diagonal(&DVector::from_iterator(keep.len(), keep.iter().map(|&i| 1.0 / eig.eigenvalues[i])));
    // Rows of the cross block B^t, i.e. W restricted to (non-sample, sample).
    let rest: Vec<usize> = (0..n).filter(|&i| in_sample[i].is_none()).collect();
    let bt = w.select_rows(rest.iter()).select_columns(sample.iter());
    let extension = bt * &ua * inv_lambda;
    let mut vectors = DMatrix::zeros(n, keep.len());
    for (l, &s) in sample.iter().enumerate() {
        vectors.row_mut(s).copy_from(&ua.row(l));
    }
    for (m, &r) in rest.iter().enumerate() {
        vectors.row_mut(r).copy_from(&extension.row(m));
    }
    let projection = project_onto_columns(&vectors, w);
    let c = w.select_columns(sample.iter());
    let approximation = &c * pinv(&a) * c.transpose();
    Ok(Nystrom { vectors, projection, approximation, min_abs_eig })
}

/// Nyström projection; errors if the sample block `A` is numerically singular.
pub fn nystrom_projection(w: &DMatrix<f64>, sample: &[usize]) -> Result<Nystrom> {
    nystrom_impl(w, sample, true)
}

/// Like [`nystrom_projection`] but drops eigenpairs of `A` below the rank
/// cutoff instead of failing.
pub fn nystrom_projection_lenient(w: &DMatrix<f64>, sample: &[usize]) -> Result<Nystrom> {
    nystrom_impl(w, sample, false)
}

/// `H^k = W^k (W^k)^+ W` with `W^k` the sampled columns of `W`.
pub fn fss_projection(w: &DMatrix<f64>, sample: &[usize]) -> DMatrix<f64> {
    project_onto_columns(&w.select_columns(sample.iter()), w)
}

/// Indices of the `k` largest scores, ties to the lower index.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

#[derive(Clone, Debug)]
pub struct Leverage {
    pub scores: Vec<f64>,
    pub columns: Vec<usize>,
    pub projection: DMatrix<f64>,
}

fn leverage_from_scores(w: &DMatrix<f64>, scores: Vec<f64>, k: usize) -> Leverage {
    let columns = top_k_indices(&scores, k);
    let projection = project_onto_columns(&w.select_columns(columns.iter()), w);
    Leverage { scores, columns, projection }
}

/// Leverage scores from the top-`k` right singular vectors, and `G^k` on the
/// `k` highest-scoring columns.
pub fn leverage_projection(w: &DMatrix<f64>, k: usize) -> Result<Leverage> {
    let n = w.ncols();
    if k == 0 || k > n {
        return Err(FssError::InvalidParameter(format!("rank {k} must lie in 1..={n}")));
    }
    let svd = w.clone().svd(false, true);
    let vt = svd.v_t.unwrap();
    let order = top_k_indices(svd.singular_values.as_slice(), k);
    let mut scores = vec![0.0; n];
    for &i in &order {
        for (j, s) in scores.iter_mut().enumerate() {
            *s += vt[(i, j)] * vt[(i, j)];
        }
    }
    scores.iter_mut().for_each(|s| *s /= k as f64);
    Ok(leverage_from_scores(w, scores, k))
}

/// One row of the error-curve table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProjectionReport {
    pub k: usize,
    pub err_best: f64,
    pub err_nystrom: f64,
    pub err_leverage: f64,
    pub err_fss: f64,
    /// `||H^k - F^k||_F`.
    pub prop1_residual: f64,
    pub beta_k: f64,
    pub gamma_k: f64,
    /// `||W - W_{:,S} A^+ W_{S,:}||_F`.
    pub err_nystrom_matrix: f64,
    /// Mean of the sampled distance block; differs from the full-matrix sigma.
    pub sigma_k: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LabReport {
    pub n: usize,
    pub sigma: f64,
    pub negative_eigenvalues: usize,
    pub sample_indices: Vec<usize>,
    pub rows: Vec<ProjectionReport>,
}

impl LabReport {
    pub const CSV_HEADER: &'static str = "k,err_best,err_nystrom,err_leverage,err_fss,prop1_residual,beta_k,gamma_k";

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.k, r.err_best, r.err_nystrom, r.err_leverage, r.err_fss, r.prop1_residual, r.beta_k, r.gamma_k
            )?;
        }
        Ok(())
    }
}

fn frobenius_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// Errors of all four approximations for one `k` on a shared spectrum and
/// farthest sample.
pub fn report_for_k(w: &DMatrix<f64>, spectrum: &Spectrum, sample: &FarthestSample, k: usize) -> Result<ProjectionReport> {
    let s = &sample.indices[..k];
    let h = fss_projection(w, s);
    let ny = nystrom_projection_lenient(w, s)?;
    let lev = leverage_from_scores(w, spectrum.leverage(k), k);
    Ok(ProjectionReport {
        k,
        err_best: spectrum.tail_error(k),
        err_nystrom: frobenius_gap(w, &ny.projection),
        err_leverage: frobenius_gap(w, &lev.projection),
        err_fss: frobenius_gap(w, &h),
        prop1_residual: frobenius_gap(&h, &ny.projection),
        beta_k: sample.betas[k - 1],
        gamma_k: spectrum.values[k - 1].abs(),
        err_nystrom_matrix: frobenius_gap(w, &ny.approximation),
        sigma_k: mean_entry(&sample.distances.columns(0, k).into_owned()),
    })
}

/// Full-matrix lab run on `graph` over `k_grid`.
pub fn error_curves(graph: &DualGraph, kernel: Kernel, k_grid: &[usize], first: FirstFace, limit: usize) -> Result<LabReport> {
    let n = graph.n();
    if n > limit {
        return Err(FssError::SizeGuard { n, limit });
    }
    if k_grid.iter().any(|&k| k == 0 || k > n) {
        return Err(FssError::InvalidParameter(format!("grid values must lie in 1..={n}")));
    }
    let full = build_full_w(graph, kernel, limit)?;
    let k_max = k_grid.iter().copied().max().unwrap_or(1);
    let sample = sample_fixed_k(graph, k_max, first)?;
    let spectrum = Spectrum::new(&full.w);
    let rows = par::map_range(k_grid.len(), |g| report_for_k(&full.w, &spectrum, &sample, k_grid[g]));
    Ok(LabReport {
        n,
        sigma: full.sigma,
        negative_eigenvalues: spectrum.negative_count(),
        sample_indices: sample.indices.clone(),
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// `(k, log(1 + gamma_k), log(1 + beta_k))` for `k = 1..=len`.
pub fn spectral_curves(spectrum: &Spectrum, sample: &FarthestSample) -> Vec<(usize, f64, f64)> {
    (0..sample.k().min(spectrum.values.len()))
        .map(|i| (i + 1, spectrum.values[i].abs().ln_1p(), sample.betas[i].ln_1p()))
        .collect()
}

/// Parses `a:b` (inclusive) or `a:b:step` or a comma list.
pub fn parse_k_grid(spec: &str) -> Result<Vec<usize>> {
    let bad = || FssError::InvalidParameter(format!("bad k grid {spec:?}"));
    let grid: Vec<usize> = if spec.contains(':') {
        let parts: Vec<usize> = spec.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        match parts[..] {
            [a, b] => (a..=b).collect(),
            [a, b, step] if step > 0 => (a..=b).step_by(step).collect(),
            _ => return Err(bad()),
        }
    } else {
        spec.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if grid.is_empty() {
        return Err(bad());
    }
    Ok(grid)
}

/// `count` grid values spread evenly over `1..=k_max`.
pub fn even_grid(k_max: usize, count: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (1..=count).map(|i| ((i * k_max) as f64 / count as f64).round() as usize).map(|k| k.max(1)).collect();
    g.dedup();
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, rank, |_, _| rng.random::<f64>() - 0.5);
        &x * x.transpose()
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let p = pinv(&a);
        assert!((&a * &p * &a - &a).norm() < 1e-12);
        assert!((&p * &a * &p - &p).norm() < 1e-12);
        assert_eq!(column_basis(&a).ncols(), 1);
    }

    #[test]
    fn full_spectrum_and_rank_one() {
        let w = random_psd(8, 8, 1);
        let s = Spectrum::new(&w);
        assert!((best_rank_k(&s, 8) - &w).norm() < 1e-10);
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let r1 = &v * v.transpose();
        assert!((best_rank_k(&Spectrum::new(&r1), 1) - &r1).norm() < 1e-10);
    }

    #[test]
    fn eigenvalue_tail_identity() {
        let w = random_psd(8, 8, 2);
        let s = Spectrum::new(&w);
        let direct = (&w - best_rank_k(&s, 3)).norm_squared();
        // Independent eigenvalues from the unsorted decomposition.
        let mut ev: Vec<f64> = SymmetricEigen::new(w.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        let tail: f64 = ev[3..].iter().map(|l| l * l).sum();
        assert!((direct - tail).abs() < 1e-9);
        assert!((s.tail_error(3).powi(2) - tail).abs() < 1e-12);
    }

    #[test]
    fn full_sample_reproduces_w() {
        let w = random_psd(10, 10, 3) + DMatrix::identity(10, 10);
        let all: Vec<usize> = (0..10).collect();
        assert!((fss_projection(&w, &all) - &w).norm() < 1e-8);
        assert!((nystrom_projection(&w, &all).unwrap().projection - &w).norm() < 1e-8);
    }

    #[test]
    fn single_column_projection() {
        let w = random_psd(6, 6, 4) + DMatrix::identity(6, 6);
        let c = w.column(2).into_owned();
        let expect = &c * (c.transpose() * &w) / c.norm_squared();
        assert!((fss_projection(&w, &[2]) - expect).norm() < 1e-12);
        let ny = nystrom_projection(&w, &[2]).unwrap();
        let col = w.column(2) / w[(2, 2)];
        assert!((ny.vectors.column(0) - col).norm() < 1e-12);
    }

    #[test]
    fn unit_diagonal_scalar_block() {
        let mut w = random_psd(5, 5, 9) + DMatrix::identity(5, 5);
        let d = w.diagonal().map(|x| 1.0 / x.sqrt());
        w = DMatrix::from_diagonal(&d) * w * DMatrix::from_diagonal(&d);
        let ny = nystrom_projection(&w, &[0]).unwrap();
        assert!((ny.vectors.column(0) - w.column(0)).norm() < 1e-12);
    }

    #[test]
    fn sampled_and_nystrom_projections_agree() {
        let w = random_psd(10, 10, 5);
        let s = [7, 1, 4, 2];
        let h = fss_projection(&w, &s);
        let f = nystrom_projection(&w, &s).unwrap().projection;
        assert!((h - f).norm() < 1e-8);
    }

    #[test]
    fn singular_block_is_rejected() {
        let w = random_psd(6, 2, 6);
        assert!(matches!(nystrom_projection(&w, &[0, 1, 2]), Err(FssError::SingularBlock { .. })));
        assert!(nystrom_projection_lenient(&w, &[0, 1, 2]).is_ok());
    }

    #[test]
    fn leverage_examples() {
        let id = DMatrix::<f64>::identity(5, 5);
        let l = leverage_projection(&id, 5).unwrap();
        assert!(l.scores.iter().all(|&p| (p - 0.2).abs() < 1e-12));
        let mut e = DMatrix::zeros(4, 4);
        e[(0, 0)] = 1.0;
        let l = leverage_projection(&e, 1).unwrap();
        assert!((l.scores[0] - 1.0).abs() < 1e-12 && l.scores[1..].iter().all(|&p| p.abs() < 1e-12));
        assert_eq!(l.columns, vec![0]);
    }

    #[test]
    fn leverage_against_normal_equations() {
        let w = random_psd(10, 10, 7);
        let l = leverage_projection(&w, 3).unwrap();
        assert!((l.scores.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let c = w.select_columns(l.columns.iter());
        let gram = c.transpose() * &c;
        let coef = gram.cholesky().unwrap().solve(&(c.transpose() * &w));
        assert!((&c * coef - &l.projection).norm() < 1e-8);
    }

    #[test]
    fn grids() {
        assert_eq!(parse_k_grid("1:4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_k_grid("2:10:4").unwrap(), vec![2, 6, 10]);
        assert_eq!(parse_k_grid("5, 7").unwrap(), vec![5, 7]);
        assert!(parse_k_grid("a:3").is_err());
        assert_eq!(even_grid(100, 4), vec![25, 50, 75, 100]);
    }
}
