//! `fss`: command-line front end for farthest sampling segmentation.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fss_core::eval::consistency_histogram;
use fss_core::lowrank_lab::{error_curves, parse_k_grid, spectral_curves, Spectrum, LAB_LIMIT};
use fss_core::mesh_io::shapes::{make_box, make_cylinder, make_icosphere, make_torus};
use fss_core::mesh_io::{cube_side_labels, export_colored_mesh, make_test_cube, write_off, ManifoldPolicy};
use fss_core::sampler::flat_beta_step;
use fss_core::sdf::write_sdf;
use fss_core::*;
use serde::Serialize;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "fss", version, about = "Farthest sampling segmentation of triangle meshes", args_override_self = true)]
struct Cli {
    /// Worker threads (0 keeps the default pool).
    #[arg(long, global = true, env = "FSS_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment a mesh into clusters.
    Segment(SegmentArgs),
    /// Export the beta curve of a farthest sample.
    Beta(BetaArgs),
    /// Compute the shape diameter function per face.
    Sdf(SdfArgs),
    /// Compare two segmentation files.
    Eval(EvalArgs),
    /// Rand-distance histogram of sampled runs against the full-matrix run.
    Histogram(HistogramArgs),
    /// Low-rank experiments on the full affinity matrix.
    #[command(subcommand)]
    Lab(LabCommand),
    /// Dual-graph utilities.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Write a synthetic test mesh.
    MakeShape(MakeShapeArgs),
}

#[derive(Subcommand, Debug)]
enum LabCommand {
    /// Projection errors of the four approximations over a k grid.
    Errors(LabErrorsArgs),
    /// Eigenvalue magnitudes beside the beta sequence.
    Curves(LabCurvesArgs),
}

#[derive(Subcommand, Debug)]
enum GraphCommand {
    /// Edge list of the weighted dual graph.
    Dump(GraphDumpArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MetricKind {
    Angular,
    Geodesic,
    Sdf,
    Product,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KernelArg {
    Distance,
    Squared,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Kernel {
        match k {
            KernelArg::Distance => Kernel::Distance,
            KernelArg::Squared => Kernel::Squared,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SdfKnobs {
    /// Cone half-angle in degrees.
    #[arg(long, default_value_t = 60.0)]
    cone_angle: f64,
    #[arg(long, default_value_t = 30)]
    rays: usize,
    #[arg(long, default_value_t = 0)]
    sdf_seed: u64,
    #[arg(long, default_value_t = 1.0)]
    outlier_sigma: f64,
    #[arg(long, default_value_t = 2000)]
    bvh_min_faces: usize,
}

impl SdfKnobs {
    fn config(&self) -> SdfConfig {
        SdfConfig {
            cone_half_angle: self.cone_angle,
            rays_per_face: self.rays,
            seed: self.sdf_seed,
            outlier_sigma: self.outlier_sigma,
            bvh_min_faces: self.bvh_min_faces,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct MeshArgs {
    /// Mesh file (OFF, OBJ or PLY).
    #[arg(long)]
    mesh: PathBuf,
    /// Keep the first two faces of every non-manifold edge instead of failing.
    #[arg(long)]
    allow_nonmanifold: bool,
}

#[derive(Args, Debug, Clone)]
struct MetricArgs {
    #[arg(long, value_enum, default_value = "geodesic")]
    metric: MetricKind,
    /// Weight of convex folds for the angular and product metrics.
    #[arg(long, default_value_t = 0.1)]
    eta_convex: f64,
    /// Precomputed SDF values; computed on the fly when absent.
    #[arg(long)]
    sdf_file: Option<PathBuf>,
    #[command(flatten)]
    sdf: SdfKnobs,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct SamplingArgs {
    /// Fraction of columns in (0, 1].
    #[arg(long)]
    frac: Option<f64>,
    /// Number of columns.
    #[arg(long)]
    k: Option<usize>,
    /// Stop when beta_k / beta_1 drops below this value.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl SamplingArgs {
    fn sampling(&self) -> Sampling {
        match (self.frac, self.k, self.epsilon) {
            (Some(f), _, _) => Sampling::Fraction(f),
            (_, Some(k), _) => Sampling::Fixed(k),
            (_, _, Some(e)) => Sampling::Epsilon(e),
            _ => unreachable!("clap enforces one sampling mode"),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SeedArgs {
    /// Default for both the sampling and the clustering seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sampling_seed: Option<u64>,
    #[arg(long)]
    kmeans_seed: Option<u64>,
    /// Fixed first sampled face instead of a seeded draw.
    #[arg(long)]
    first_face: Option<usize>,
}

impl SeedArgs {
    fn first_face(&self) -> FirstFace {
        match self.first_face {
            Some(i) => FirstFace::Index(i),
            None => FirstFace::Random { seed: self.sampling_seed.unwrap_or(self.seed) },
        }
    }

    fn kmeans_seed(&self) -> u64 {
        self.kmeans_seed.unwrap_or(self.seed)
    }
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SegmentArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long)]
    clusters: usize,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "distance")]
    kernel: KernelArg,
    /// Segmentation output, one label per line.
    #[arg(long)]
    out: PathBuf,
    /// Colored PLY export.
    #[arg(long)]
    ply: Option<PathBuf>,
    /// Sampled face indices, one per line.
    #[arg(long)]
    indices_out: Option<PathBuf>,
    /// Binary dump of the row-normalized sampled affinity block.
    #[arg(long)]
    dump_wk: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct BetaArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    /// Step drop below which the curve is reported as flat.
    #[arg(long, default_value_t = 1e-3)]
    flat_tol: f64,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    indices_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SdfArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    sdf: SdfKnobs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct EvalArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct HistogramArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long)]
    clusters: usize,
    /// Comma-separated sample fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.005,0.01,0.05,0.1,0.25")]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, value_enum, default_value = "distance")]
    kernel: KernelArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct LabErrorsArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    /// `a:b`, `a:b:step` or a comma list.
    #[arg(long)]
    kgrid: String,
    #[arg(long, value_enum, default_value = "distance")]
    kernel: KernelArg,
    /// Largest face count accepted for the dense full matrix.
    #[arg(long, default_value_t = LAB_LIMIT)]
    limit: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct LabCurvesArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "distance")]
    kernel: KernelArg,
    #[arg(long, default_value_t = LAB_LIMIT)]
    limit: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct GraphDumpArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Shape {
    /// Unit cube with `--resolution` cells per edge.
    Cube,
    /// 4 x 1 x 1 box with `--resolution` cells per unit.
    Box,
    Sphere,
    Torus,
    Cylinder,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct MakeShapeArgs {
    #[arg(value_enum)]
    shape: Shape,
    /// Subdivision; the meaning depends on the shape.
    #[arg(long, default_value_t = 10)]
    resolution: usize,
    /// OFF output.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth side labels (cube only).
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let args = config::expand_config(std::env::args_os().collect())?;
    let cli = Cli::parse_from(args);
    if cli.threads > 0 && !fss_core::par::configure_threads(cli.threads) && cfg!(feature = "parallel") {
        eprintln!("warning: could not resize the worker pool");
    }
    match cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Beta(a) => cmd_beta(a),
        Command::Sdf(a) => cmd_sdf(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Histogram(a) => cmd_histogram(a),
        Command::Lab(LabCommand::Errors(a)) => cmd_lab_errors(a),
        Command::Lab(LabCommand::Curves(a)) => cmd_lab_curves(a),
        Command::Graph(GraphCommand::Dump(a)) => cmd_graph_dump(a),
        Command::MakeShape(a) => cmd_make_shape(a),
    }
}

fn load_prepared(m: &MeshArgs) -> Result<PreparedMesh> {
    let mesh = load_mesh(&m.mesh, None).with_context(|| format!("loading mesh {}", m.mesh.display()))?;
    let policy = if m.allow_nonmanifold { ManifoldPolicy::KeepFirstTwo } else { ManifoldPolicy::Reject };
    PreparedMesh::new(mesh, policy).context("preparing mesh")
}

fn build_metric(pm: &PreparedMesh, a: &MetricArgs) -> Result<Metric> {
    Ok(match a.metric {
        MetricKind::Angular => Metric::Angular { eta_convex: a.eta_convex },
        MetricKind::Geodesic => Metric::Geodesic,
        MetricKind::Product => Metric::Product { eta_convex: a.eta_convex },
        MetricKind::Sdf => {
            let values = match &a.sdf_file {
                Some(p) => load_sdf(p, pm.n_faces()).with_context(|| format!("loading SDF {}", p.display()))?,
                None => compute_sdf(pm, &a.sdf.config()).context("computing SDF")?,
            };
            Metric::Sdf { values }
        }
    })
}

fn graph_for(m: &MeshArgs, a: &MetricArgs) -> Result<(PreparedMesh, DualGraph)> {
    let pm = load_prepared(m)?;
    let metric = build_metric(&pm, a)?;
    let g = build_dual_graph(&pm, &metric).context("building dual graph")?;
    Ok((pm, g))
}

fn metric_json(a: &MetricArgs) -> serde_json::Value {
    let mut v = json!({ "kind": a.metric });
    match a.metric {
        MetricKind::Angular | MetricKind::Product => v["eta_convex"] = json!(a.eta_convex),
        MetricKind::Sdf => match &a.sdf_file {
            Some(p) => v["sdf_file"] = json!(p),
            None => v["sdf"] = json!(a.sdf.config()),
        },
        MetricKind::Geodesic => {}
    }
    v
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// CSV or text destination: a file, or stdout.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w).with_context(|| format!("writing {}", p.display()))?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).context("writing to stdout")?;
        }
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Writes `<out>.manifest.json`. Contains no timestamps or host data, so
/// repeated runs produce identical manifests.
fn write_manifest(out: &Path, command: &str, body: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "command": command,
        "fss_version": env!("CARGO_PKG_VERSION"),
        "parallel": cfg!(feature = "parallel"),
        "run": body,
    });
    let path = manifest_path(out);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_indices(path: &Path, indices: &[usize]) -> Result<()> {
    with_output(Some(path), |w| {
        for i in indices {
            writeln!(w, "{i}")?;
        }
        Ok(())
    })
}

fn cmd_segment(a: SegmentArgs) -> Result<()> {
    let (pm, g) = graph_for(&a.mesh, &a.metric)?;
    let mut cfg = SegmentConfig::new(a.clusters, a.sampling.sampling());
    cfg.first_face = a.seeds.first_face();
    cfg.kmeans = KMeansConfig { seed: a.seeds.kmeans_seed(), replicates: a.replicates, max_iter: a.max_iter };
    cfg.kernel = a.kernel.into();
    let out = fss_core::pipeline::segment_graph(&g, &cfg).context("segmenting")?;
    if matches!(cfg.sampling, Sampling::Epsilon(_)) {
        eprintln!("epsilon rule selected k = {}", out.k());
    }
    out.segmentation.write(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.ply {
        export_colored_mesh(&pm.mesh, &out.segmentation, p).context("exporting colored mesh")?;
    }
    if let Some(p) = &a.indices_out {
        write_indices(p, out.sample_indices())?;
    }
    if let Some(p) = &a.dump_wk {
        let mut w = create(p)?;
        out.affinity.write_binary(&mut w).with_context(|| format!("writing {}", p.display()))?;
    }
    write_manifest(
        &a.out,
        "segment",
        json!({
            "mesh": a.mesh.mesh,
            "n_faces": pm.n_faces(),
            "metric": metric_json(&a.metric),
            "config": cfg,
            "k": out.k(),
            "sigma_k": out.sigma_k(),
            "beta_k": out.betas().last(),
            "sssp_calls": out.sssp_calls,
            "n_clusters": out.segmentation.n_clusters(),
            "inertia": out.segmentation.inertia(),
        }),
    )
}

fn cmd_beta(a: BetaArgs) -> Result<()> {
    let (_, g) = graph_for(&a.mesh, &a.metric)?;
    let first = a.seeds.first_face();
    let sample = match a.sampling.sampling() {
        Sampling::Epsilon(e) => sample_epsilon(&g, e, first),
        s => {
            let k = s.fixed_size(g.n())?.expect("fixed mode");
            sample_fixed_k(&g, k, first)
        }
    }
    .context("sampling")?;
    if let Some(l) = flat_beta_step(&sample, a.flat_tol) {
        eprintln!("beta curve first flattens (step drop < {}) at l = {l}", a.flat_tol);
    }
    with_output(a.out.as_deref(), |w| {
        writeln!(w, "l,beta,beta_over_beta1")?;
        for ((l, r), b) in beta_curve(&sample).into_iter().zip(&sample.betas) {
            writeln!(w, "{l},{b:e},{r:e}")?;
        }
        Ok(())
    })?;
    if let Some(p) = &a.indices_out {
        write_indices(p, &sample.indices)?;
    }
    if let Some(out) = &a.out {
        write_manifest(
            out,
            "beta",
            json!({
                "mesh": a.mesh.mesh,
                "metric": metric_json(&a.metric),
                "sampling": a.sampling.sampling(),
                "first_face": first,
                "k": sample.k(),
                "beta_k": sample.betas.last(),
            }),
        )?;
    }
    Ok(())
}

fn cmd_sdf(a: SdfArgs) -> Result<()> {
    let pm = load_prepared(&a.mesh)?;
    let cfg = a.sdf.config();
    let values = compute_sdf(&pm, &cfg).context("computing SDF")?;
    write_sdf(&a.out, &values).with_context(|| format!("writing {}", a.out.display()))?;
    write_manifest(&a.out, "sdf", json!({ "mesh": a.mesh.mesh, "n_faces": pm.n_faces(), "sdf": cfg }))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let sa = Segmentation::read(&a.a).with_context(|| format!("reading {}", a.a.display()))?;
    let sb = Segmentation::read(&a.b).with_context(|| format!("reading {}", a.b.display()))?;
    let c = fss_core::eval::pair_counts(&sa, &sb).context("comparing segmentations")?;
    println!("RI {}", c.rand());
    println!("JI {}", c.jaccard());
    println!("d_R {}", 1.0 - c.rand());
    println!("d_J {}", 1.0 - c.jaccard());
    Ok(())
}

fn cmd_histogram(a: HistogramArgs) -> Result<()> {
    let pm = load_prepared(&a.mesh)?;
    let metric = build_metric(&pm, &a.metric)?;
    let mut cfg = SegmentConfig::new(a.clusters, Sampling::Fraction(1.0));
    cfg.first_face = a.seeds.first_face();
    cfg.kmeans.seed = a.seeds.kmeans_seed();
    cfg.kmeans.replicates = a.replicates;
    cfg.kernel = a.kernel.into();
    let h = consistency_histogram(&pm, &metric, &cfg, &a.fractions, a.trials, a.bins).context("building histogram")?;
    with_output(a.out.as_deref(), |mut w| h.write_csv(&mut w))?;
    if let Some(out) = &a.out {
        write_manifest(
            out,
            "histogram",
            json!({
                "mesh": a.mesh.mesh,
                "metric": metric_json(&a.metric),
                "config": cfg,
                "fractions": a.fractions,
                "trials": a.trials,
                "bins": a.bins,
                "distances": h.distances,
            }),
        )?;
    }
    Ok(())
}

fn cmd_lab_errors(a: LabErrorsArgs) -> Result<()> {
    let (_, g) = graph_for(&a.mesh, &a.metric)?;
    let grid = parse_k_grid(&a.kgrid)?;
    let report = error_curves(&g, a.kernel.into(), &grid, a.seeds.first_face(), a.limit).context("lab run")?;
    if report.negative_eigenvalues > 0 {
        eprintln!("note: the full affinity matrix has {} negative eigenvalues", report.negative_eigenvalues);
    }
    with_output(a.out.as_deref(), |mut w| report.write_csv(&mut w))?;
    if let Some(out) = &a.out {
        write_manifest(
            out,
            "lab errors",
            json!({
                "mesh": a.mesh.mesh,
                "metric": metric_json(&a.metric),
                "first_face": a.seeds.first_face(),
                "n": report.n,
                "sigma": report.sigma,
                "negative_eigenvalues": report.negative_eigenvalues,
                "sigma_k": report.rows.iter().map(|r| r.sigma_k).collect::<Vec<_>>(),
                "err_nystrom_matrix": report.rows.iter().map(|r| r.err_nystrom_matrix).collect::<Vec<_>>(),
            }),
        )?;
    }
    Ok(())
}

fn cmd_lab_curves(a: LabCurvesArgs) -> Result<()> {
    let (_, g) = graph_for(&a.mesh, &a.metric)?;
    if a.k == 0 || a.k > g.n() {
        bail!("k must lie in 1..={}", g.n());
    }
    let full = build_full_w(&g, a.kernel.into(), a.limit).context("full affinity")?;
    let spectrum = Spectrum::new(&full.w);
    let sample = sample_fixed_k(&g, a.k, a.seeds.first_face()).context("sampling")?;
    with_output(a.out.as_deref(), |w| {
        writeln!(w, "l,log1p_abs_lambda,log1p_beta")?;
        for (l, lam, beta) in spectral_curves(&spectrum, &sample) {
            writeln!(w, "{l},{lam:e},{beta:e}")?;
        }
        Ok(())
    })?;
    if let Some(out) = &a.out {
        write_manifest(
            out,
            "lab curves",
            json!({ "mesh": a.mesh.mesh, "metric": metric_json(&a.metric), "k": a.k, "sigma": full.sigma }),
        )?;
    }
    Ok(())
}

fn cmd_graph_dump(a: GraphDumpArgs) -> Result<()> {
    let (_, g) = graph_for(&a.mesh, &a.metric)?;
    eprintln!("{} faces, {} edges, weight floor {:e}", g.n(), g.n_edges(), g.epsilon_floor());
    with_output(a.out.as_deref(), |mut w| g.write_csv(&mut w))
}

fn cmd_make_shape(a: MakeShapeArgs) -> Result<()> {
    let r = a.resolution.max(1);
    let mesh = match a.shape {
        Shape::Cube => make_test_cube(r),
        Shape::Box => make_box([4.0, 1.0, 1.0], [4 * r, r, r]),
        Shape::Sphere => make_icosphere(1.0, r.min(7)),
        Shape::Torus => make_torus(2.0, 0.7, 3 * r, r),
        Shape::Cylinder => make_cylinder(0.5, 3.0, 2 * r, r),
    };
    let mut w = create(&a.out)?;
    write_off(&mut w, &mesh).with_context(|| format!("writing {}", a.out.display()))?;
    w.flush()?;
    if let Some(p) = &a.labels_out {
        if !matches!(a.shape, Shape::Cube) {
            bail!("--labels-out is only available for the cube");
        }
        Segmentation::from_labels(&cube_side_labels(r)).write(p)?;
    }
    eprintln!("{} faces", mesh.n_faces());
    Ok(())
}
