//! Shape diameter function by inward cone ray casting.

mod bvh;

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bvh::{closest_brute_force, ray_triangle, Bvh};

use crate::error::{FssError, Result};
use crate::mesh_io::PreparedMesh;
use crate::par;

/// Rays closer than this to the hit face's plane (|cos| of the incidence
/// angle) are treated as grazing and ignored.
const GRAZING_COS: f64 = 1e-3;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdfConfig {
    /// Degrees, in (0, 90).
    pub cone_half_angle: f64,
    pub rays_per_face: usize,
    pub seed: u64,
    /// Lengths farther than this many standard deviations from the median are dropped.
    pub outlier_sigma: f64,
    /// Meshes with at least this many faces use the box hierarchy.
    pub bvh_min_faces: usize,
}

impl Default for SdfConfig {
    fn default() -> Self {
        SdfConfig { cone_half_angle: 60.0, rays_per_face: 30, seed: 0, outlier_sigma: 1.0, bvh_min_faces: 2000 }
    }
}

impl SdfConfig {
    fn validate(&self) -> Result<()> {
        if !(self.cone_half_angle > 0.0 && self.cone_half_angle < 90.0) {
            return Err(FssError::InvalidParameter(format!(
                "cone half-angle must lie in (0, 90) degrees, got {}",
                self.cone_half_angle
            )));
        }
        if self.rays_per_face == 0 {
            return Err(FssError::InvalidParameter("rays_per_face must be at least 1".into()));
        }
        if !(self.outlier_sigma > 0.0 && self.outlier_sigma.is_finite()) {
            return Err(FssError::InvalidParameter(format!("outlier_sigma must be positive, got {}", self.outlier_sigma)));
        }
        Ok(())
    }
}

/// A cone ray: unit direction and its angle to the cone axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeRay {
    pub dir: Vector3<f64>,
    pub theta: f64,
}

/// Jittered spiral over the spherical cap around `-n_face`, in a frame tied
/// to the face's first edge. The jitter stream is keyed by the face index.
pub fn cone_directions(pm: &PreparedMesh, face: usize, cfg: &SdfConfig) -> Vec<ConeRay> {
    let axis = -pm.geometry.normals[face];
    let c = pm.mesh.corners(face);
    let t1 = (c[1] - c[0]).normalize();
    let t2 = axis.cross(&t1);
    let one_minus_cos = 1.0 - cfg.cone_half_angle.to_radians().cos();
    let r = cfg.rays_per_face;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(face as u64);
    (0..r)
        .map(|m| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let cos_t = 1.0 - one_minus_cos * (m as f64 + u) / r as f64;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let phi = m as f64 * GOLDEN_ANGLE + 2.0 * PI * v / r as f64;
            let dir = (axis * cos_t + (t1 * phi.cos() + t2 * phi.sin()) * sin_t).normalize();
            ConeRay { dir, theta: cos_t.clamp(-1.0, 1.0).acos() }
        })
        .collect()
}

/// Weight of a ray at angle `theta`: inverse angle, with the angle clamped
/// below at half the angular width of the innermost spiral band.
pub fn ray_weight(theta: f64, cfg: &SdfConfig) -> f64 {
    let min_theta = cfg.cone_half_angle.to_radians() / (2.0 * cfg.rays_per_face as f64);
    1.0 / theta.max(min_theta)
}

/// Weighted mean of `(length, weight)` samples after dropping lengths more
/// than `outlier_sigma` standard deviations from the median.
pub fn robust_weighted_mean(samples: &[(f64, f64)], outlier_sigma: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut lengths: Vec<f64> = samples.iter().map(|s| s.0).collect();
    lengths.sort_by(f64::total_cmp);
    let m = lengths.len();
    let median = if m % 2 == 1 { lengths[m / 2] } else { 0.5 * (lengths[m / 2 - 1] + lengths[m / 2]) };
    let mean = lengths.iter().sum::<f64>() / m as f64;
    let std = (lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
    let (mut num, mut den) = (0.0, 0.0);
    for &(l, w) in samples {
        if (l - median).abs() <= outlier_sigma * std || std == 0.0 {
            num += w * l;
            den += w;
        }
    }
    (den > 0.0).then(|| num / den)
}

struct Caster<'a> {
    pm: &'a PreparedMesh,
    triangles: Vec<[Point3<f64>; 3]>,
    bvh: Option<Bvh>,
    min_t: f64,
}

impl<'a> Caster<'a> {
    fn new(pm: &'a PreparedMesh, cfg: &SdfConfig) -> Self {
        let n = pm.n_faces();
        let triangles: Vec<_> = (0..n).map(|f| pm.mesh.corners(f)).collect();
        let bvh = (n >= cfg.bvh_min_faces).then(|| Bvh::build(&triangles));
        let mean_edge = triangles.iter().map(|t| (t[1] - t[0]).norm()).sum::<f64>() / n.max(1) as f64;
        Caster { pm, triangles, bvh, min_t: 1e-9 * mean_edge }
    }

    /// Length of the first accepted hit from face `origin` along `dir`.
    fn cast(&self, origin: usize, dir: &Vector3<f64>) -> Option<f64> {
        let o = self.pm.geometry.barycenters[origin];
        let normals = &self.pm.geometry.normals;
        let hit = |f: usize| {
            if f == origin || dir.dot(&normals[f]).abs() < GRAZING_COS {
                return None;
            }
            ray_triangle(&o, dir, &self.triangles[f]).filter(|&t| t > self.min_t)
        };
        let best = match &self.bvh {
            Some(b) => b.closest(&o, dir, hit),
            None => closest_brute_force(self.triangles.len(), hit),
        };
        best.map(|(t, _)| t)
    }

    fn face_sdf(&self, face: usize, cfg: &SdfConfig) -> Result<f64> {
        let samples: Vec<(f64, f64)> = cone_directions(self.pm, face, cfg)
            .iter()
            .filter_map(|r| self.cast(face, &r.dir).map(|t| (t, ray_weight(r.theta, cfg))))
            .collect();
        robust_weighted_mean(&samples, cfg.outlier_sigma).ok_or(FssError::SdfMiss { face })
    }
}

/// Per-face shape diameter; the mesh must be closed.
pub fn compute_sdf(pm: &PreparedMesh, cfg: &SdfConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    pm.mesh.check_watertight()?;
    let caster = Caster::new(pm, cfg);
    par::map_range(pm.n_faces(), |f| caster.face_sdf(f, cfg)).into_iter().collect()
}

/// Ray lengths (with weights) for one face before outlier rejection.
pub fn face_ray_samples(pm: &PreparedMesh, face: usize, cfg: &SdfConfig) -> Vec<(ConeRay, Option<f64>)> {
    let caster = Caster::new(pm, cfg);
    cone_directions(pm, face, cfg).into_iter().map(|r| (r, caster.cast(face, &r.dir))).collect()
}

pub fn parse_sdf(text: &str, n: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(n);
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| FssError::Parse { line: i + 1, msg: format!("expected a number, found {t:?}") })?;
        if !v.is_finite() {
            return Err(FssError::Parse { line: i + 1, msg: format!("non-finite value {t:?}") });
        }
        values.push(v);
    }
    if values.len() != n {
        return Err(FssError::LengthMismatch { expected: n, got: values.len() });
    }
    Ok(values)
}

/// Reads one value per line; `n` is the mesh face count.
pub fn load_sdf(path: impl AsRef<Path>, n: usize) -> Result<Vec<f64>> {
    parse_sdf(&std::fs::read_to_string(path)?, n)
}

pub fn write_sdf(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(path, text)?;
    Ok(())
}
