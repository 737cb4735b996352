//! Farthest sampling segmentation (FSS) of triangulated surfaces.
//!
//! The pipeline computes a few columns of the face-affinity matrix, chosen by
//! farthest-point selection in a face metric over the weighted dual graph,
//! and clusters the row-normalized sample with cosine k-means++.
//!
//! Besides the segmentation pipeline the crate carries a small low-rank
//! laboratory ([`lowrank_lab`]) that compares the sampled column space against the
//! truncated eigendecomposition, Nyström and leverage-score projections of
//! the full affinity matrix.

pub mod affinity;
pub mod cluster;
pub mod error;
pub mod eval;
pub mod lowrank_lab;
pub mod mesh_io;
pub mod metric_graph;
pub mod par;
pub mod pipeline;
pub mod sampler;
pub mod sdf;

pub use affinity::{build_full_w, build_wk, normalize_rows, AffinitySample, FullAffinity, Kernel};
pub use cluster::{kmeans_cosine, KMeansConfig, Segmentation};
pub use error::{FssError, Result};
pub use eval::{jaccard_index, rand_index, seg_distance, DistanceKind, PairCounts};
pub use mesh_io::{face_adjacency, face_geometry, load_mesh, FaceGeometry, MeshFormat, PreparedMesh, TriMesh};
pub use metric_graph::{build_dual_graph, DualGraph, Metric};
pub use pipeline::{segment, Sampling, SegmentConfig, SegmentOutput};
pub use sampler::{beta_curve, sample_epsilon, sample_fixed_k, FarthestSample, FirstFace};
pub use sdf::{compute_sdf, load_sdf, SdfConfig};
