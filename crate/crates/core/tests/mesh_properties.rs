mod common;

use common::{capped_cylinder, l_prism, long_box, prepared};
use fss_core::eval::consistency_histogram;
use fss_core::mesh_io::shapes::{make_box, make_icosphere, make_torus};
use fss_core::mesh_io::{cube_side_labels, export_colored_mesh, make_test_cube, write_off, MeshFormat};
use fss_core::metric_graph::geodesic_edge_distance;
use fss_core::pipeline::segment_graph;
use fss_core::sdf::face_ray_samples;
use fss_core::*;
use nalgebra::{DMatrix, Isometry3, Point3, Translation3, UnitQuaternion, Vector3};

fn metrics() -> Vec<Metric> {
    vec![Metric::angular(), Metric::Geodesic, Metric::product()]
}

#[test]
fn sampled_columns_obey_the_triangle_inequality() {
    for mesh in [make_test_cube(5), l_prism(1), capped_cylinder(12, 3)] {
        let pm = prepared(mesh);
        assert!(pm.n_faces() <= 300);
        for metric in metrics() {
            let g = build_dual_graph(&pm, &metric).unwrap();
            let d = g.all_pairs().unwrap();
            let s = sample_fixed_k(&g, pm.n_faces() / 3, FirstFace::Index(0)).unwrap();
            let n = pm.n_faces();
            for r in 0..s.k() {
                let col = s.distances.column(r);
                for i in 0..n {
                    for j in 0..n {
                        assert!((col[i] - col[j]).abs() <= d[(i, j)], "{} {i} {j} {r}", metric.name());
                    }
                }
            }
        }
    }
}

#[test]
fn geodesic_edge_distance_is_rigid_invariant() {
    let base = prepared(make_torus(2.0, 0.7, 16, 9));
    let iso = Isometry3::from_parts(
        Translation3::new(3.0, -1.5, 0.25),
        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::new(0.3, -1.0, 0.4)), 1.1),
    );
    let moved = prepared(base.mesh.map_vertices(|p| iso * p).unwrap());
    for i in 0..base.n_faces() {
        for nb in base.adjacency.neighbors(i) {
            let a = geodesic_edge_distance(&base, i, nb.face).unwrap();
            let b = geodesic_edge_distance(&moved, i, nb.face).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()))
}

#[test]
fn sdf_scale_and_rigid_behaviour() {
    let base = prepared(make_box([1.0, 0.6, 0.3], [5, 3, 2]));
    let cfg = SdfConfig { seed: 5, ..Default::default() };
    let sdf = compute_sdf(&base, &cfg).unwrap();
    assert_eq!(sdf, compute_sdf(&base, &cfg).unwrap());

    let scaled = prepared(base.mesh.map_vertices(|p| Point3::from(p.coords * 2.5)).unwrap());
    let s2 = compute_sdf(&scaled, &cfg).unwrap();
    let expect: Vec<f64> = sdf.iter().map(|v| v * 2.5).collect();
    assert!(rel_close(&s2, &expect, 1e-6));

    let iso = Isometry3::new(Vector3::new(-4.0, 1.0, 7.0), Vector3::new(0.2, 0.9, -0.4));
    let moved = prepared(base.mesh.map_vertices(|p| iso * p).unwrap());
    assert!(rel_close(&compute_sdf(&moved, &cfg).unwrap(), &sdf, 1e-6));
}

#[test]
fn sdf_of_thin_plate_matches_analytic_ray_lengths() {
    let t = 0.1;
    let pm = prepared(make_box([2.0, 2.0, t], [20, 20, 1]));
    let cfg = SdfConfig::default();
    let sdf = compute_sdf(&pm, &cfg).unwrap();
    let reach = t * cfg.cone_half_angle.to_radians().tan();
    let mut checked = 0;
    for f in 0..pm.n_faces() {
        let nrm = pm.geometry.normals[f];
        let b = pm.geometry.barycenters[f];
        let interior = b.x > reach && b.x < 2.0 - reach && b.y > reach && b.y < 2.0 - reach;
        if nrm.z.abs() < 0.5 || !interior {
            continue;
        }
        checked += 1;
        // Reference: inward rays hit the opposite plane at t / cos(theta).
        let samples: Vec<(f64, f64)> = face_ray_samples(&pm, f, &cfg)
            .iter()
            .map(|(ray, hit)| {
                let analytic = t / ray.dir.dot(&-nrm);
                assert!((hit.unwrap() - analytic).abs() < 1e-9 * analytic);
                (analytic, fss_core::sdf::ray_weight(ray.theta, &cfg))
            })
            .collect();
        let reference = fss_core::sdf::robust_weighted_mean(&samples, cfg.outlier_sigma).unwrap();
        assert!((sdf[f] - reference).abs() <= 0.05 * reference);
        assert!(sdf[f] >= t && sdf[f] <= 2.0 * t);
    }
    assert!(checked > 100);
}

#[test]
fn sdf_of_sphere_is_nearly_constant() {
    let pm = prepared(make_icosphere(1.5, 3));
    let sdf = compute_sdf(&pm, &SdfConfig::default()).unwrap();
    let n = sdf.len() as f64;
    let mean = sdf.iter().sum::<f64>() / n;
    let std = (sdf.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(std / mean < 0.10, "cv {}", std / mean);
}

fn row_distance(m: &DMatrix<f64>, i: usize, l: usize) -> f64 {
    m.row(i).iter().zip(m.row(l).iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn far_and_close_pairs_separate_in_sample_rows() {
    let pm = prepared(long_box(3));
    assert!(pm.n_faces() <= 1000);
    let g = build_dual_graph(&pm, &Metric::Geodesic).unwrap();
    let d = g.all_pairs().unwrap();
    let n = g.n();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1..n).step_by(7) {
            pairs.push((d[(i, j)], i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let decile = pairs.len() / 10;
    let close = &pairs[..decile];
    let far = &pairs[pairs.len() - decile..];
    let full = sample_fixed_k(&g, n, FirstFace::Index(0)).unwrap();
    let mut separated = Vec::new();
    for k in [1, 2, 4, 8, 16, 32, 64, 128, n] {
        let wk = build_wk(full.truncated(k), Kernel::Distance).unwrap().wk;
        let mc = median(close.iter().map(|p| row_distance(&wk, p.1, p.2)).collect());
        let mf = median(far.iter().map(|p| row_distance(&wk, p.1, p.2)).collect());
        separated.push((k, mf > mc));
    }
    let first = separated.iter().position(|s| s.1).expect("some k separates the populations");
    assert!(separated[first..].iter().all(|s| s.1), "{separated:?}");
}

#[test]
fn sample_rows_stabilize_across_first_faces() {
    let pm = prepared(l_prism(2));
    let g = build_dual_graph(&pm, &Metric::Geodesic).unwrap();
    let n = g.n();
    let a = sample_fixed_k(&g, n, FirstFace::Random { seed: 1 }).unwrap();
    let b = sample_fixed_k(&g, n, FirstFace::Random { seed: 2 }).unwrap();
    assert_ne!(a.indices[0], b.indices[0]);
    let rows: Vec<usize> = (0..n).step_by(3).collect();
    let mut disc = Vec::new();
    for frac in [0.01, 0.05, 0.25, 1.0] {
        let k = ((frac * n as f64) as usize).max(1);
        let wa = build_wk(a.truncated(k), Kernel::Distance).unwrap().wk;
        let wb = build_wk(b.truncated(k), Kernel::Distance).unwrap().wk;
        let mut worst: f64 = 0.0;
        for &i in &rows {
            for &l in &rows {
                worst = worst.max((row_distance(&wa, i, l) - row_distance(&wb, i, l)).abs());
            }
        }
        disc.push(worst);
    }
    assert!(disc[3] < 1e-9, "{disc:?}");
    assert!(disc[2] + disc[3] <= disc[0] + disc[1], "{disc:?}");
}

#[test]
fn cube_full_and_sampled_agree() {
    let s = 10;
    let pm = prepared(make_test_cube(s));
    let truth = Segmentation::from_labels(&cube_side_labels(s));
    let g = build_dual_graph(&pm, &Metric::angular()).unwrap();
    let small = segment_graph(&g, &SegmentConfig::new(6, Sampling::Fraction(0.01)).with_seeds(3, 4)).unwrap();
    let full = segment_graph(&g, &SegmentConfig::new(6, Sampling::Fraction(1.0)).with_seeds(3, 4)).unwrap();
    assert_eq!(full.k(), pm.n_faces());
    assert_eq!(seg_distance(&small.segmentation, &full.segmentation, DistanceKind::Rand).unwrap(), 0.0);
    assert_eq!(seg_distance(&small.segmentation, &truth, DistanceKind::Rand).unwrap(), 0.0);
}

#[test]
fn cube_consistency_histogram_is_all_zero() {
    // 1% of 1200 faces still gives more columns than sides.
    let pm = prepared(make_test_cube(10));
    let cfg = SegmentConfig::new(6, Sampling::Fraction(1.0));
    let h = consistency_histogram(&pm, &Metric::angular(), &cfg, &[0.01, 0.1], 4, 10).unwrap();
    for d in &h.distances {
        assert!(d.iter().all(|&x| x == 0.0), "{d:?}");
    }
    assert_eq!(h.frequencies(0)[0], 1.0);
}

#[test]
fn single_cluster_on_any_mesh() {
    let pm = prepared(capped_cylinder(10, 2));
    let out = segment(&pm, &Metric::Geodesic, &SegmentConfig::new(1, Sampling::Fraction(0.2))).unwrap();
    assert!(out.segmentation.labels().iter().all(|&l| l == 1));
}

#[test]
fn beta_curves_start_at_one_and_decrease() {
    for metric in metrics() {
        let g = build_dual_graph(&prepared(l_prism(1)), &metric).unwrap();
        let s = sample_fixed_k(&g, 40, FirstFace::Random { seed: 9 }).unwrap();
        let c = beta_curve(&s);
        assert_eq!(c[0], (1, 1.0));
        assert!(c.windows(2).all(|w| w[1].1 <= w[0].1));
    }
}

#[test]
fn colored_export_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = make_test_cube(2);
    let seg = Segmentation::from_labels(&cube_side_labels(2));
    let ply = dir.path().join("cube.ply");
    export_colored_mesh(&mesh, &seg, &ply).unwrap();
    let text = std::fs::read_to_string(&ply).unwrap();
    let colors: std::collections::HashSet<&str> = text
        .lines()
        .filter(|l| l.starts_with("3 "))
        .map(|l| l.splitn(5, ' ').nth(4).unwrap())
        .collect();
    assert_eq!(colors.len(), 6);
    let back = load_mesh(&ply, None).unwrap();
    assert_eq!(back.faces(), mesh.faces());
    assert_eq!(back.vertices(), mesh.vertices());

    let one = Segmentation::from_labels(&vec![4; mesh.n_faces()]);
    export_colored_mesh(&mesh, &one, &ply).unwrap();
    let text = std::fs::read_to_string(&ply).unwrap();
    let colors: std::collections::HashSet<&str> =
        text.lines().filter(|l| l.starts_with("3 ")).map(|l| l.splitn(5, ' ').nth(4).unwrap()).collect();
    assert_eq!(colors.len(), 1);

    let short = Segmentation::from_labels(&[1, 2]);
    assert!(matches!(export_colored_mesh(&mesh, &short, &ply), Err(FssError::LengthMismatch { .. })));
}

#[test]
fn off_round_trip_preserves_face_order() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = make_torus(1.0, 0.3, 8, 5);
    let path = dir.path().join("t.off");
    let mut f = std::fs::File::create(&path).unwrap();
    write_off(&mut f, &mesh).unwrap();
    drop(f);
    let back = load_mesh(&path, Some(MeshFormat::Off)).unwrap();
    assert_eq!(back.faces(), mesh.faces());
    for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
        assert!((a - b).norm() < 1e-12);
    }
}
