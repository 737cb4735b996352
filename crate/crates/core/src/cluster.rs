//! Spherical k-means++ under cosine distance, and segmentation vectors.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FssError, Result};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub seed: u64,
    pub replicates: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { seed: 0, replicates: 10, max_iter: 100 }
    }
}

/// Per-face cluster labels in `1..=n_clusters`, in mesh face order.
#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    labels: Vec<usize>,
    n_clusters: usize,
    inertia: Option<f64>,
}

impl Segmentation {
    /// Relabels arbitrary integer labels to `1..=m`, keeping their sorted order
    /// (so 0-based ground-truth files map `0 -> 1`, `1 -> 2`, ...).
    pub fn from_labels(raw: &[usize]) -> Segmentation {
        let distinct: BTreeMap<usize, usize> = raw.iter().map(|&l| (l, 0)).collect();
        let remap: BTreeMap<usize, usize> = distinct.keys().enumerate().map(|(i, &l)| (l, i + 1)).collect();
        Segmentation {
            labels: raw.iter().map(|l| remap[l]).collect(),
            n_clusters: remap.len(),
            inertia: None,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sum of within-cluster cosine distances, when produced by k-means.
    pub fn inertia(&self) -> Option<f64> {
        self.inertia
    }

    /// One label per line.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.labels.len() * 3);
        for l in &self.labels {
            s.push_str(&l.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Segmentation> {
        let mut raw = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: usize = t.parse().map_err(|_| FssError::Parse {
                line: i + 1,
                msg: format!("expected a non-negative integer label, found {t:?}"),
            })?;
            raw.push(v);
        }
        Ok(Segmentation::from_labels(&raw))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Segmentation> {
        Segmentation::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Unit-norm points stored contiguously.
struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl Points<'_> {
    fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cosine_distance(x: &[f64], unit_centroid: &[f64]) -> f64 {
    (1.0 - dot(x, unit_centroid)).max(0.0)
}

/// Outcome of one seeded Lloyd run.
#[derive(Clone, Debug)]
pub struct ReplicateRun {
    /// 0-based labels.
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step.
    pub history: Vec<f64>,
}

/// k-means++ seeding with cosine distance as the sampling weight.
fn seed_centroids(points: &Points, n_c: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = points.n();
    let dim = points.dim;
    let mut centroids = Vec::with_capacity(n_c * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(points.get(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| cosine_distance(points.get(i), points.get(first))).collect();
    for _ in 1..n_c {
        let total: f64 = nearest.iter().sum();
        if !(total > 0.0) {
            return Err(FssError::DegenerateInput(format!(
                "fewer than {n_c} distinct point directions"
            )));
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &d) in nearest.iter().enumerate() {
            acc += d;
            if d > 0.0 && acc > target {
                chosen = Some(i);
                break;
            }
        }
        // Rounding can leave `target` just above the final partial sum.
        let chosen = chosen.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap());
        let c = points.get(chosen);
        centroids.extend_from_slice(c);
        for (i, m) in nearest.iter_mut().enumerate() {
            let d = cosine_distance(points.get(i), c);
            if d < *m {
                *m = d;
            }
        }
    }
    Ok(centroids)
}

fn assign(points: &Points, centroids: &[f64], n_c: usize) -> (Vec<usize>, Vec<f64>) {
    let dim = points.dim;
    let pairs = par::map_range(points.n(), |i| {
        let x = points.get(i);
        let mut best = (0usize, f64::INFINITY);
        for c in 0..n_c {
            let d = cosine_distance(x, &centroids[c * dim..(c + 1) * dim]);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    });
    pairs.into_iter().unzip()
}

/// Moves, into every empty cluster, the point farthest from its own centroid
/// (only taken from clusters that keep at least one member).
fn repair_empty(points: &Points, labels: &mut [usize], dists: &mut [f64], centroids: &mut [f64], n_c: usize) {
    let dim = points.dim;
    let mut counts = vec![0usize; n_c];
    labels.iter().for_each(|&l| counts[l] += 1);
    for c in 0..n_c {
        if counts[c] > 0 {
            continue;
        }
        let mut pick: Option<usize> = None;
        for i in 0..labels.len() {
            if counts[labels[i]] > 1 && pick.is_none_or(|p| dists[i] > dists[p]) {
                pick = Some(i);
            }
        }
        let Some(p) = pick else { return };
        counts[labels[p]] -= 1;
        counts[c] = 1;
        labels[p] = c;
        dists[p] = 0.0;
        centroids[c * dim..(c + 1) * dim].copy_from_slice(points.get(p));
    }
}

/// Normalized member means; a cluster whose mean vanishes keeps its centroid.
fn update_centroids(points: &Points, labels: &[usize], centroids: &mut [f64], n_c: usize) {
    let dim = points.dim;
    let mut sums = vec![0.0; n_c * dim];
    for (i, &l) in labels.iter().enumerate() {
        for (s, x) in sums[l * dim..(l + 1) * dim].iter_mut().zip(points.get(i)) {
            *s += x;
        }
    }
    for c in 0..n_c {
        let s = &sums[c * dim..(c + 1) * dim];
        let norm = dot(s, s).sqrt();
        if norm > 0.0 {
            for (dst, v) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(s) {
                *dst = v / norm;
            }
        }
    }
}

fn lloyd(points: &Points, n_c: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Result<ReplicateRun> {
    let mut centroids = seed_centroids(points, n_c, rng)?;
    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let (mut next, mut dists) = assign(points, &centroids, n_c);
        repair_empty(points, &mut next, &mut dists, &mut centroids, n_c);
        history.push(dists.iter().sum());
        if next == labels {
            break;
        }
        labels = next;
        update_centroids(points, &labels, &mut centroids, n_c);
    }
    let inertia = *history.last().unwrap();
    Ok(ReplicateRun { labels, inertia, history })
}

fn check_points(points: &DMatrix<f64>, n_c: usize) -> Result<()> {
    let n = points.nrows();
    if n_c == 0 || n_c > n {
        return Err(FssError::InvalidParameter(format!("cluster count {n_c} must lie in 1..={n}")));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(FssError::InvalidParameter("points must be finite".into()));
    }
    Ok(())
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// A single seeded replicate; exposed for inspecting the inertia trace.
pub fn kmeans_replicate(points: &DMatrix<f64>, n_c: usize, seed: u64, replicate: usize, max_iter: usize) -> Result<ReplicateRun> {
    check_points(points, n_c)?;
    let data = points.transpose();
    let pts = Points { data: data.as_slice(), dim: points.ncols() };
    lloyd(&pts, n_c, max_iter, &mut replicate_rng(seed, replicate))
}

/// Clusters the rows of `points` (expected unit-norm) into `n_c` clusters.
/// Returns the lowest-inertia replicate; ties go to the lowest replicate index.
pub fn kmeans_cosine(points: &DMatrix<f64>, n_c: usize, cfg: &KMeansConfig) -> Result<Segmentation> {
    check_points(points, n_c)?;
    let data = points.transpose();
    let pts = Points { data: data.as_slice(), dim: points.ncols() };
    let runs = par::map_range(cfg.replicates.max(1), |r| lloyd(&pts, n_c, cfg.max_iter, &mut replicate_rng(cfg.seed, r)));
    let mut best: Option<ReplicateRun> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one replicate");
    Ok(Segmentation {
        labels: best.labels.iter().map(|l| l + 1).collect(),
        n_clusters: n_c,
        inertia: Some(best.inertia),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_points(angles: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(angles.len(), 2, |i, j| if j == 0 { angles[i].cos() } else { angles[i].sin() })
    }

    #[test]
    fn one_cluster() {
        let p = circle_points(&[0.0, 0.1, 0.2, 3.0]);
        let s = kmeans_cosine(&p, 1, &KMeansConfig::default()).unwrap();
        assert_eq!(s.labels(), &[1, 1, 1, 1]);
    }

    #[test]
    fn n_clusters_equals_n() {
        let p = circle_points(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let s = kmeans_cosine(&p, 5, &KMeansConfig::default()).unwrap();
        let mut l = s.labels().to_vec();
        l.sort();
        assert_eq!(l, vec![1, 2, 3, 4, 5]);
        assert!(s.inertia().unwrap() < 1e-15);
    }

    #[test]
    fn parameter_and_degenerate_errors() {
        let p = circle_points(&[0.0, 1.0]);
        assert!(kmeans_cosine(&p, 3, &KMeansConfig::default()).is_err());
        assert!(kmeans_cosine(&p, 0, &KMeansConfig::default()).is_err());
        let same = circle_points(&[0.5; 6]);
        assert!(matches!(kmeans_cosine(&same, 2, &KMeansConfig::default()), Err(FssError::DegenerateInput(_))));
    }

    /// Spherical k-means objective of a partition with normalized-mean centroids.
    fn partition_inertia(p: &DMatrix<f64>, labels: &[usize], n_c: usize) -> f64 {
        let mut total = 0.0;
        for c in 0..n_c {
            let members: Vec<usize> = (0..p.nrows()).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                return f64::INFINITY;
            }
            let mut m = nalgebra::RowDVector::zeros(p.ncols());
            for &i in &members {
                m += p.row(i);
            }
            let m = m.normalize();
            total += members.iter().map(|&i| 1.0 - p.row(i).dot(&m)).sum::<f64>();
        }
        total
    }

    #[test]
    fn two_cones_match_exhaustive_optimum() {
        // 20 points in two tight cones around opposite directions of S^1.
        let mut angles = Vec::new();
        for i in 0..10 {
            angles.push(0.3 + 0.02 * i as f64);
            angles.push(0.3 + std::f64::consts::PI + 0.015 * i as f64);
        }
        let p = circle_points(&angles);
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1u32..(1 << 19) {
            let labels: Vec<usize> = (0..20).map(|i| ((mask >> i) & 1) as usize).collect();
            let v = partition_inertia(&p, &labels, 2);
            if v < best.0 {
                best = (v, mask);
            }
        }
        let s = kmeans_cosine(&p, 2, &KMeansConfig { seed: 3, ..Default::default() }).unwrap();
        let expect: Vec<usize> = (0..20).map(|i| ((best.1 >> i) & 1) as usize).collect();
        let same = (0..20).all(|i| (s.labels()[i] == s.labels()[0]) == (expect[i] == expect[0]));
        assert!(same, "{:?} vs {expect:?}", s.labels());
        assert!((s.inertia().unwrap() - best.0).abs() < 1e-12);
        // The optimum separates the cones.
        assert!((0..20).all(|i| (expect[i] == expect[0]) == (i % 2 == 0)));
    }

    #[test]
    fn inertia_never_increases() {
        let n = 300;
        let p = DMatrix::from_fn(n, 4, |i, j| ((i * 7 + j * 13) % 17) as f64 + 0.1 * ((i * j) % 5) as f64 + 0.5);
        let mut p = p;
        crate::affinity::normalize_matrix_rows(&mut p);
        for rep in 0..5 {
            let run = kmeans_replicate(&p, 6, 9, rep, 100).unwrap();
            for w in run.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", run.history);
            }
            let mut seen = vec![false; 6];
            run.labels.iter().for_each(|&l| seen[l] = true);
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn reproducible() {
        let p = DMatrix::from_fn(200, 3, |i, j| (((i + 1) * (j + 3)) % 11) as f64 + 1.0);
        let mut p = p;
        crate::affinity::normalize_matrix_rows(&mut p);
        let cfg = KMeansConfig { seed: 42, replicates: 4, max_iter: 50 };
        assert_eq!(kmeans_cosine(&p, 4, &cfg).unwrap(), kmeans_cosine(&p, 4, &cfg).unwrap());
    }

    #[test]
    fn repair_fills_empty_cluster() {
        let p = circle_points(&[0.0, 0.1, 0.2, 2.0]);
        let data = p.transpose();
        let pts = Points { data: data.as_slice(), dim: 2 };
        let mut labels = vec![0, 0, 0, 0];
        let mut centroids = vec![1.0, 0.0, 0.0, 1.0];
        let mut dists: Vec<f64> = (0..4).map(|i| cosine_distance(pts.get(i), &centroids[0..2])).collect();
        repair_empty(&pts, &mut labels, &mut dists, &mut centroids, 2);
        assert_eq!(labels, vec![0, 0, 0, 1]);
        assert_eq!(&centroids[2..4], pts.get(3));
    }

    #[test]
    fn segmentation_text_round_trip() {
        let s = Segmentation::parse("0\n0\n3\n\n1\n").unwrap();
        assert_eq!(s.labels(), &[1, 1, 3, 2]);
        assert_eq!(s.n_clusters(), 3);
        assert_eq!(Segmentation::parse(&s.to_text()).unwrap(), s);
        assert!(matches!(Segmentation::parse("1\nx\n"), Err(FssError::Parse { line: 2, .. })));
    }
}
