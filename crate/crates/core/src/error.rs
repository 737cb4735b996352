use std::io;

/// Errors raised anywhere in the segmentation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum FssError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid face {face}: {msg}")]
    InvalidFace { face: usize, msg: String },

    #[error("degenerate face {face}: zero area")]
    DegenerateFace { face: usize },

    #[error("non-manifold edge ({a}, {b}) shared by {count} faces")]
    NonManifoldEdge { a: usize, b: usize, count: usize },

    #[error("open mesh: edge ({a}, {b}) has {count} incident face(s), expected 2")]
    OpenMesh { a: usize, b: usize, count: usize },

    #[error("faces {i} and {j} are not adjacent")]
    NotAdjacent { i: usize, j: usize },

    #[error("dual graph is disconnected: {components} components")]
    Disconnected { components: usize },

    #[error("face {node} is unreachable from face {source_face}")]
    Unreachable { source_face: usize, node: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("all shape-diameter rays missed for face {face}")]
    SdfMiss { face: usize },

    #[error("sampled distances are all zero, sigma_k = 0")]
    ZeroSigma,

    #[error("degenerate clustering input: {0}")]
    DegenerateInput(String),

    #[error("size guard: n = {n} exceeds the limit {limit}")]
    SizeGuard { n: usize, limit: usize },

    #[error("sample block is singular (smallest |eigenvalue| {min_abs_eig:e}); choose a different sample")]
    SingularBlock { min_abs_eig: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, FssError>;
