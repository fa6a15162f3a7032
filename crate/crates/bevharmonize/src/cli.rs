//! Command-line pipelines over the library.
//!
//! One binary, six subcommands: `merge`, `split`, `pdir-stats`,
//! `weights`, `evaluate`, `gen-synthetic`. Every output file is written
//! atomically and carries the resolved run configuration in its header
//! record, so artifacts are reproducible from their own provenance.
//! Thread count (`--threads`, or `BEVHARMONIZE_THREADS`) only changes how
//! work fans out; outputs are byte-identical for any value.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation error (bad records,
//! unknown categories, inconsistent rigs), 3 I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::category::CategoryMap;
use crate::dataset::{self, DatasetError};
use crate::metrics::{self, EvalConfig, MetricsError};
use crate::pdir::{self, DMinPolicy, PdirConfig, PdirResult, SplitStrategy};
use crate::record::{self, RecordError};
use crate::synth::{self, SceneSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug)]
enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) => m,
        }
    }
}

impl From<RecordError> for CliError {
    fn from(e: RecordError) -> Self {
        match e {
            RecordError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Record(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Record(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<pdir::SplitError> for CliError {
    fn from(e: pdir::SplitError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<synth::SynthError> for CliError {
    fn from(e: synth::SynthError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bevharmonize",
    version,
    about = "Harmonize multi-camera 3D detection datasets and evaluate detections",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// Suppress progress logging on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for per-sample fan-out (default: rayon's choice).
    #[arg(long, global = true, env = "BEVHARMONIZE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge manifests: pad rigs with ghost cameras, rescale intrinsics.
    Merge(MergeArgs),
    /// Partition a manifest into training subsets.
    Split(SplitArgs),
    /// Per-sample pavement depth statistics with a histogram summary.
    PdirStats(PdirStatsArgs),
    /// Expert softmax weights from a pdir-stats file.
    Weights(WeightsArgs),
    /// Evaluate a detections file against ground truth.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic manifest and detections from a scene spec.
    GenSynthetic(GenSyntheticArgs),
}

#[derive(Debug, Args)]
struct MergeArgs {
    /// Input manifest files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Category map file; defaults to the identity map over harmonized names.
    #[arg(long)]
    category_map: Option<PathBuf>,
    /// Target image width in pixels.
    #[arg(long, default_value_t = 704)]
    width: u32,
    /// Target image height in pixels.
    #[arg(long, default_value_t = 384)]
    height: u32,
    /// Output manifest path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    /// Quantile bins of the pavement depth statistic.
    Pdir,
    /// One subset per provenance dataset.
    Ds,
    /// Seeded random partition.
    Rd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DMinPolicyArg {
    Fixed,
    MinObjectDepth,
}

#[derive(Debug, Args)]
struct PdirFlags {
    /// Name of the forward camera.
    #[arg(long, default_value = "front")]
    front_camera: String,
    /// Depth interval width in meters.
    #[arg(long, default_value_t = 10.0)]
    delta_d: f64,
    /// Near depth in meters (fixed policy).
    #[arg(long, default_value_t = 5.0)]
    d_min: f64,
    /// How the near depth is chosen.
    #[arg(long, value_enum, default_value_t = DMinPolicyArg::Fixed)]
    d_min_policy: DMinPolicyArg,
}

impl PdirFlags {
    fn to_config(&self) -> PdirConfig {
        PdirConfig {
            front_camera: self.front_camera.clone(),
            delta_d: self.delta_d,
            d_min_policy: match self.d_min_policy {
                DMinPolicyArg::Fixed => DMinPolicy::Fixed(self.d_min),
                DMinPolicyArg::MinObjectDepth => DMinPolicy::MinObjectDepth,
            },
        }
    }
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Input manifest file.
    input: PathBuf,
    #[arg(long)]
    category_map: Option<PathBuf>,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Number of subsets (pdir and rd strategies).
    #[arg(long, default_value_t = 2)]
    subsets: usize,
    /// Seed for the rd strategy.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pdir: PdirFlags,
    /// Output assignments path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PdirStatsArgs {
    /// Input manifest file.
    input: PathBuf,
    #[arg(long)]
    category_map: Option<PathBuf>,
    #[command(flatten)]
    pdir: PdirFlags,
    /// Number of equal-width histogram bins.
    #[arg(long, default_value_t = 10)]
    hist_bins: usize,
    /// Explicit histogram bin edges (overrides --hist-bins).
    #[arg(long, value_delimiter = ',')]
    hist_edges: Option<Vec<f64>>,
    /// Output stats path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct WeightsArgs {
    /// Input pdir-stats file.
    input: PathBuf,
    /// Output weights path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Ground-truth manifest file.
    #[arg(long)]
    gt: PathBuf,
    /// Detections file.
    #[arg(long)]
    det: PathBuf,
    #[arg(long)]
    category_map: Option<PathBuf>,
    /// Half-width of the square evaluation range, meters.
    #[arg(long, default_value_t = 50.0)]
    range: f64,
    /// AP center-distance thresholds, meters.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 4.0])]
    thresholds: Vec<f64>,
    /// Threshold whose matches feed the TP errors, meters.
    #[arg(long, default_value_t = 2.0)]
    tp_threshold: f64,
    /// Disable the 10% recall/precision floors (raw area under PR).
    #[arg(long)]
    raw_ap: bool,
    /// Optional machine-readable report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenSyntheticArgs {
    /// Scene spec JSON file.
    #[arg(long)]
    spec: PathBuf,
    /// Output manifest path.
    #[arg(long)]
    out_manifest: PathBuf,
    /// Optional output detections path.
    #[arg(long)]
    out_detections: Option<PathBuf>,
}

/// Parse `argv` and run the selected pipeline. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                _ => {
                    eprint!("{e}");
                    EXIT_USAGE
                }
            };
        }
    };

    let log = Logger { quiet: cli.quiet };
    let result = match &cli.command {
        Command::Merge(args) => run_merge(args, &log),
        Command::Split(args) => run_split(args, &log),
        Command::PdirStats(args) => run_pdir_stats(args, cli.threads, &log),
        Command::Weights(args) => run_weights(args, &log),
        Command::Evaluate(args) => run_evaluate(args, &log),
        Command::GenSynthetic(args) => run_gen_synthetic(args, &log),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

struct Logger {
    quiet: bool,
}

impl Logger {
    fn info(&self, msg: std::fmt::Arguments<'_>) {
        if !self.quiet {
            eprintln!("info: {msg}");
        }
    }
}

macro_rules! info {
    ($log:expr, $($arg:tt)*) => {
        $log.info(format_args!($($arg)*))
    };
}

fn load_category_map(path: Option<&PathBuf>) -> Result<CategoryMap, CliError> {
    match path {
        None => Ok(CategoryMap::identity()),
        Some(p) => CategoryMap::from_path(p).map_err(|e| {
            if e.kind() == std::io::ErrorKind::InvalidData {
                CliError::Validation(format!("{}: {e}", p.display()))
            } else {
                CliError::Io(format!("{}: {e}", p.display()))
            }
        }),
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn run_merge(args: &MergeArgs, log: &Logger) -> Result<(), CliError> {
    let cmap = load_category_map(args.category_map.as_ref())?;
    let mut manifests = Vec::with_capacity(args.inputs.len());
    for input in &args.inputs {
        let m = dataset::load_manifest(input, &cmap)?;
        info!(
            log,
            "loaded {} samples from {}",
            m.samples.len(),
            input.display()
        );
        manifests.push(m);
    }
    let merged = dataset::merge_datasets(&manifests, args.width, args.height)?;
    let config = serde_json::json!({
        "subcommand": "merge",
        "inputs": args.inputs.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
        "category_map": args.category_map.as_ref().map(|p| path_str(p)),
        "width": args.width,
        "height": args.height,
        "out": path_str(&args.out),
    });
    dataset::write_manifest(&args.out, &merged, Some(config))?;
    info!(
        log,
        "merged {} samples, {} cameras per rig -> {}",
        merged.samples.len(),
        merged.canonical_camera_count,
        args.out.display()
    );
    Ok(())
}

fn run_split(args: &SplitArgs, log: &Logger) -> Result<(), CliError> {
    let cmap = load_category_map(args.category_map.as_ref())?;
    let manifest = dataset::load_manifest(&args.input, &cmap)?;
    let strategy = match args.strategy {
        StrategyArg::Pdir => SplitStrategy::Pdir {
            n_subsets: args.subsets,
            config: args.pdir.to_config(),
        },
        StrategyArg::Ds => SplitStrategy::ByDataset,
        StrategyArg::Rd => SplitStrategy::Random {
            n_subsets: args.subsets,
            seed: args.seed,
        },
    };
    let report = pdir::split_dataset(&manifest, &strategy)?;
    let flagged = report.assignments.iter().filter(|a| a.flagged).count();
    if flagged > 0 {
        info!(
            log,
            "{flagged} samples had no computable pdir; median-binned and flagged"
        );
    }
    let config = serde_json::json!({
        "subcommand": "split",
        "input": path_str(&args.input),
        "category_map": args.category_map.as_ref().map(|p| path_str(p)),
        "strategy": match args.strategy {
            StrategyArg::Pdir => "pdir",
            StrategyArg::Ds => "ds",
            StrategyArg::Rd => "rd",
        },
        "subsets": report.n_subsets,
        "seed": args.seed,
        "pdir": args.pdir.to_config(),
        "out": path_str(&args.out),
    });
    record::write_records(&args.out, Some(config), &report.assignments)?;
    info!(
        log,
        "split {} samples into {} subsets -> {}",
        report.assignments.len(),
        report.n_subsets,
        args.out.display()
    );
    Ok(())
}

/// Summary record appended after the per-sample stats.
#[derive(Debug, Serialize, Deserialize)]
struct PdirSummaryRecord {
    histogram: Histogram,
    failed: Vec<String>,
    n_samples: usize,
    n_failed: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Histogram {
    edges: Vec<f64>,
    counts: Vec<usize>,
}

fn build_histogram(values: &[f64], bins: usize, explicit_edges: Option<&[f64]>) -> Histogram {
    let edges: Vec<f64> = match explicit_edges {
        Some(e) => e.to_vec(),
        None => {
            if values.is_empty() || bins == 0 {
                return Histogram {
                    edges: vec![],
                    counts: vec![],
                };
            }
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            };
            (0..=bins)
                .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
                .collect()
        }
    };
    if edges.len() < 2 {
        return Histogram {
            edges,
            counts: vec![],
        };
    }
    let mut counts = vec![0usize; edges.len() - 1];
    for &v in values {
        for i in 0..counts.len() {
            let last = i + 1 == counts.len();
            if v >= edges[i] && (v < edges[i + 1] || (last && v <= edges[i + 1])) {
                counts[i] += 1;
                break;
            }
        }
    }
    Histogram { edges, counts }
}

fn run_pdir_stats(
    args: &PdirStatsArgs,
    threads: Option<usize>,
    log: &Logger,
) -> Result<(), CliError> {
    let cmap = load_category_map(args.category_map.as_ref())?;
    let manifest = dataset::load_manifest(&args.input, &cmap)?;
    let config = args.pdir.to_config();
    let results = pdir::compute_pdir_batch(&manifest, &config, threads);

    let mut stats: Vec<PdirResult> = results
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok().cloned())
        .collect();
    stats.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let mut failed: Vec<String> = results
        .iter()
        .filter(|(_, r)| r.is_err())
        .map(|(id, _)| id.clone())
        .collect();
    failed.sort();

    let pdirs: Vec<f64> = stats.iter().map(|s| s.pdir).collect();
    let histogram = build_histogram(&pdirs, args.hist_bins, args.hist_edges.as_deref());

    let header = serde_json::json!({
        "subcommand": "pdir-stats",
        "input": path_str(&args.input),
        "category_map": args.category_map.as_ref().map(|p| path_str(p)),
        "pdir": config,
        "hist_bins": args.hist_bins,
        "hist_edges": args.hist_edges,
        "out": path_str(&args.out),
    });

    // per-sample records then one summary record
    let mut lines: Vec<serde_json::Value> = Vec::with_capacity(stats.len() + 1);
    for s in &stats {
        lines.push(serde_json::to_value(s).expect("serializable"));
    }
    lines.push(
        serde_json::to_value(PdirSummaryRecord {
            histogram,
            n_samples: results.len(),
            n_failed: failed.len(),
            failed,
        })
        .expect("serializable"),
    );
    record::write_records(&args.out, Some(header), &lines)?;
    info!(
        log,
        "pdir computed for {}/{} samples -> {}",
        stats.len(),
        results.len(),
        args.out.display()
    );
    Ok(())
}

/// Output record of the `weights` subcommand.
#[derive(Debug, Serialize, Deserialize)]
struct WeightRecord {
    sample_id: String,
    w1: f64,
    w2: f64,
}

fn run_weights(args: &WeightsArgs, log: &Logger) -> Result<(), CliError> {
    let (_, records) = record::read_records::<serde_json::Value>(&args.input)?;
    let mut pdirs = Vec::new();
    for (line, value) in records {
        if value.get("sample_id").is_none() {
            continue; // summary record
        }
        let stat: PdirResult = serde_json::from_value(value).map_err(|e| {
            CliError::Validation(format!(
                "{}:{line}: malformed record: {e}",
                args.input.display()
            ))
        })?;
        pdirs.push((stat.sample_id, stat.pdir));
    }
    let weights =
        crate::experts::expert_weights(&pdirs).map_err(|e| CliError::Validation(e.to_string()))?;

    let config = serde_json::json!({
        "subcommand": "weights",
        "input": path_str(&args.input),
        "out": path_str(&args.out),
    });
    let mut lines: Vec<serde_json::Value> = weights
        .sample_ids
        .iter()
        .zip(weights.w1.iter().zip(&weights.w2))
        .map(|(sample_id, (w1, w2))| {
            serde_json::to_value(WeightRecord {
                sample_id: sample_id.clone(),
                w1: *w1,
                w2: *w2,
            })
            .expect("serializable")
        })
        .collect();
    lines.push(serde_json::json!({ "pdir_max": weights.pdir_max }));
    record::write_records(&args.out, Some(config), &lines)?;
    info!(
        log,
        "weights for {} samples -> {}",
        weights.sample_ids.len(),
        args.out.display()
    );
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs, log: &Logger) -> Result<(), CliError> {
    let cmap = load_category_map(args.category_map.as_ref())?;
    let manifest = dataset::load_manifest(&args.gt, &cmap)?;
    let detections = metrics::load_detections(&args.det, &cmap)?;
    info!(
        log,
        "{} ground-truth samples, {} detections",
        manifest.samples.len(),
        detections.len()
    );

    let mut config = EvalConfig {
        dist_thresholds: args.thresholds.clone(),
        tp_threshold: args.tp_threshold,
        range_m: args.range,
        ..EvalConfig::default()
    };
    if args.raw_ap {
        config = config.raw_ap();
    }
    let report = metrics::evaluate(&manifest, &detections, &config)?;
    print!("{}", report.table());

    if let Some(out) = &args.out {
        let header = serde_json::json!({
            "subcommand": "evaluate",
            "gt": path_str(&args.gt),
            "det": path_str(&args.det),
            "category_map": args.category_map.as_ref().map(|p| path_str(p)),
            "raw_ap": args.raw_ap,
            "config": config,
            "out": path_str(out),
        });
        record::write_records(out, Some(header), &[&report])?;
        info!(log, "report -> {}", out.display());
    }
    Ok(())
}

fn run_gen_synthetic(args: &GenSyntheticArgs, log: &Logger) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.spec.display())))?;
    let spec: SceneSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.spec.display())))?;
    let (manifest, detections) = synth::generate(&spec)?;

    let config = serde_json::json!({
        "subcommand": "gen-synthetic",
        "spec_path": path_str(&args.spec),
        "spec": spec,
        "out_manifest": path_str(&args.out_manifest),
        "out_detections": args.out_detections.as_ref().map(|p| path_str(p)),
    });
    dataset::write_manifest(&args.out_manifest, &manifest, Some(config.clone()))?;
    info!(
        log,
        "generated {} samples -> {}",
        manifest.samples.len(),
        args.out_manifest.display()
    );
    if let Some(out) = &args.out_detections {
        metrics::write_detections(out, &detections, Some(config))?;
        info!(
            log,
            "generated {} detections -> {}",
            detections.len(),
            out.display()
        );
    }
    Ok(())
}
