//! Command-line front end: `eval`, `collab`, and `bench`.
//!
//! Machine-readable results go to CSV/JSON files; standard output carries a
//! human-readable summary only.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::collaborative::{run_collaboration, run_collaboration_rsh, CollabConfig, PartitionSpec, PartitionStrategy};
use crate::data::{load_csv, synth_planted, Dataset, LabelColumn, LoadOptions};
use crate::ensemble::{write_scores, DetectorConfig, DetectorKind};
use crate::error::{Error, Result};
use crate::evaluation::{repeated_eval, EvalResult};
use crate::histogram::Epsilon;
use crate::rng::derive_seed;

/// Environment variable naming the default results directory.
pub const RESULTS_DIR_ENV: &str = "LSH_ITABLES_RESULTS_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "lsh-itables",
    version,
    about = "Hashing-based ensemble outlier detection experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated centralized train-and-score runs; appends one ledger row.
    Eval(EvalArgs),
    /// Multi-participant simulation with optional ε-DP releases.
    Collab(CollabArgs),
    /// Wall-clock train/test timings per detector.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DetectorArg {
    LshItables,
    RsH,
    Iforest,
}

impl From<DetectorArg> for DetectorKind {
    fn from(d: DetectorArg) -> Self {
        match d {
            DetectorArg::LshItables => DetectorKind::LshITables,
            DetectorArg::RsH => DetectorKind::RsH,
            DetectorArg::Iforest => DetectorKind::IForest,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PartitionArg {
    Uniform,
    Skewed,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// CSV file; header row optional, label column 0/1 (1 = outlier).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Zero-based label column (default: last column).
    #[arg(long)]
    pub label_col: Option<usize>,
    /// Keep exact duplicate rows instead of removing them.
    #[arg(long)]
    pub keep_duplicates: bool,
}

impl DatasetArgs {
    pub fn load(&self) -> Result<Dataset> {
        load_csv(
            &self.dataset,
            LoadOptions {
                label_column: self.label_col.map_or(LabelColumn::Last, LabelColumn::Index),
                dedup: !self.keep_duplicates,
            },
        )
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Results directory; the ledger defaults to `<dir>/results.csv`.
    #[arg(long, env = RESULTS_DIR_ENV, default_value = "results")]
    pub results_dir: PathBuf,
    /// Explicit ledger path.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

impl OutputArgs {
    pub fn ledger_path(&self) -> PathBuf {
        self.ledger
            .clone()
            .unwrap_or_else(|| self.results_dir.join("results.csv"))
    }
}

fn parse_epsilon(s: &str) -> std::result::Result<Epsilon, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1], got {v}"))
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, value_enum, default_value = "lsh-itables")]
    pub detector: DetectorArg,
    /// Base models per ensemble.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub m: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Release budget for hash-table detectors (`inf` = non-private).
    #[arg(long, default_value = "inf", value_parser = parse_epsilon)]
    pub epsilon: Epsilon,
    /// Write per-point scores of the first run as CSV.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CollabArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, value_enum, default_value = "lsh-itables")]
    pub detector: DetectorArg,
    /// Participants.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub m: u32,
    /// Seeds to average over.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-participant budget (`inf` = non-private).
    #[arg(long, default_value = "inf", value_parser = parse_epsilon)]
    pub epsilon: Epsilon,
    /// Comma-separated budgets to sweep instead of `--epsilon`.
    #[arg(long, value_delimiter = ',', value_parser = parse_epsilon)]
    pub epsilon_sweep: Option<Vec<Epsilon>>,
    #[arg(long, value_enum, default_value = "uniform")]
    pub partition: PartitionArg,
    /// Share of labelled outliers routed to participant 0 (skewed only).
    #[arg(long, default_value_t = 1.0, value_parser = parse_fraction)]
    pub skew: f64,
    /// Exact number of inliers given to participant 0 (skewed only).
    #[arg(long)]
    pub first_inliers: Option<usize>,
    /// JSON-lines log of every exchanged message (first run).
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// `(epsilon, auc_mean, auc_std)` rows for plotting.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Dataset CSV; when absent a synthetic set is generated.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub label_col: Option<usize>,
    #[arg(long)]
    pub keep_duplicates: bool,
    /// Size of the synthetic dataset (1% planted outliers).
    #[arg(long, default_value_t = 100_000)]
    pub synthetic: usize,
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["lsh-itables", "rs-h", "iforest"])]
    pub detectors: Vec<DetectorArg>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub m: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timing CSV path.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalResult> {
    let dataset = args.data.load()?;
    let config = DetectorConfig::new(args.detector.into())
        .with_models(args.m as usize)
        .with_epsilon(args.epsilon);
    let result = repeated_eval(&config, &dataset, args.runs as usize, args.seed)?;
    result.append_to_ledger(args.output.ledger_path())?;

    if let Some(path) = &args.scores {
        let model = config.fit(&dataset.points, derive_seed(args.seed, 0))?;
        write_scores(File::create(path)?, &model.scores(&dataset.points), model.orientation())?;
    }
    println!(
        "{} on {} (n={}, d={}): AUC {:.2} ± {:.2} over {} runs, {:.2}s",
        result.detector,
        result.dataset,
        dataset.len(),
        dataset.dim(),
        100.0 * result.auc_mean,
        100.0 * result.auc_std,
        result.runs,
        result.seconds
    );
    Ok(result)
}

/// One sweep point of a collaboration experiment.
#[derive(Clone, Debug)]
pub struct CollabPoint {
    pub result: EvalResult,
    /// Mean AUC per participant across runs (`None` if never defined).
    pub participant_aucs: Vec<Option<f64>>,
    pub total_epsilon: Epsilon,
    /// Conservative bound counting every released base model separately.
    pub sequential_epsilon: Epsilon,
}

fn partition_for(args: &CollabArgs, seed: u64) -> PartitionSpec {
    let strategy = match args.partition {
        PartitionArg::Uniform => PartitionStrategy::UniformRandom,
        PartitionArg::Skewed => PartitionStrategy::OutlierSkewed {
            fraction: args.skew,
            first_inliers: args.first_inliers,
        },
    };
    PartitionSpec {
        participants: args.k as usize,
        strategy,
        seed,
    }
}

fn suffixed(path: &Path, epsilon: Epsilon) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}-eps{epsilon}{ext}"))
}

pub fn cmd_collab(args: &CollabArgs) -> Result<Vec<CollabPoint>> {
    let kind: DetectorKind = args.detector.into();
    if kind == DetectorKind::IForest {
        return Err(Error::InvalidParameter(
            "iforest models are not mergeable; use lsh-itables or rs-h".into(),
        ));
    }
    let dataset = args.data.load()?;
    let sweep = args.epsilon_sweep.clone().unwrap_or_else(|| vec![args.epsilon]);
    let k = args.k as usize;
    let mut points = Vec::with_capacity(sweep.len());

    for &epsilon in &sweep {
        let mut run_aucs = Vec::new();
        let mut per_participant = vec![Vec::new(); k];
        let mut seconds = 0.0;
        let mut total_epsilon = Epsilon::Infinite;
        let mut sequential_epsilon = Epsilon::Infinite;
        for r in 0..args.runs as u64 {
            let run_seed = derive_seed(args.seed, r);
            let config = CollabConfig::new(
                partition_for(args, derive_seed(run_seed, u64::MAX)),
                args.m as usize,
                epsilon,
                run_seed,
            );
            let start = Instant::now();
            let (aucs, mean, account, transcript) = match kind {
                DetectorKind::RsH => {
                    let rep = run_collaboration_rsh(&dataset, &config)?;
                    (rep.participant_aucs(), rep.mean_auc, rep.account, rep.transcript)
                }
                _ => {
                    let rep = run_collaboration(&dataset, &config)?;
                    (rep.participant_aucs(), rep.mean_auc, rep.account, rep.transcript)
                }
            };
            seconds += start.elapsed().as_secs_f64();
            if mean.is_nan() {
                return Err(Error::DegenerateLabels);
            }
            run_aucs.push(mean);
            for (p, a) in aucs.into_iter().enumerate() {
                per_participant[p].extend(a);
            }
            total_epsilon = account.total;
            sequential_epsilon = account.sequential_total();
            if r == 0 {
                if let Some(path) = &args.transcript {
                    let target = if sweep.len() > 1 {
                        suffixed(path, epsilon)
                    } else {
                        path.clone()
                    };
                    transcript.write(target)?;
                }
            }
        }
        let result = EvalResult::from_runs(kind.to_string(), dataset.name.clone(), run_aucs, seconds, epsilon, k);
        result.append_to_ledger(args.output.ledger_path())?;
        let participant_aucs = per_participant
            .iter()
            .map(|v| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64))
            .collect();
        points.push(CollabPoint {
            result,
            participant_aucs,
            total_epsilon,
            sequential_epsilon,
        });
    }

    if let Some(path) = &args.plot_data {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record(["epsilon", "auc_mean", "auc_std"])?;
        for p in &points {
            out.write_record([
                p.result.epsilon.to_string(),
                format!("{:.6}", p.result.auc_mean),
                format!("{:.6}", p.result.auc_std),
            ])?;
        }
        out.flush()?;
    }

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for p in &points {
        writeln!(
            out,
            "{} on {} with k={} ε={} per participant (total ε={}, {} over all releases): AUC {:.2} ± {:.2} over {} runs",
            p.result.detector,
            p.result.dataset,
            k,
            p.result.epsilon,
            p.total_epsilon,
            p.sequential_epsilon,
            100.0 * p.result.auc_mean,
            100.0 * p.result.auc_std,
            p.result.runs
        )?;
        for (id, a) in p.participant_aucs.iter().enumerate() {
            match a {
                Some(a) => writeln!(out, "  participant {id}: AUC {:.2}", 100.0 * a)?,
                None => writeln!(out, "  participant {id}: no AUC (empty or single-class shard)")?,
            }
        }
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub detector: DetectorKind,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

impl BenchRow {
    pub fn total(&self) -> f64 {
        self.train_seconds + self.test_seconds
    }
}

/// Times training and scoring of one detector over all points.
pub fn time_detector(config: &DetectorConfig, dataset: &Dataset, seed: u64) -> Result<BenchRow> {
    let start = Instant::now();
    let model = config.fit(&dataset.points, seed)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let scores = model.scores(&dataset.points);
    let test_seconds = start.elapsed().as_secs_f64();
    std::hint::black_box(scores);
    Ok(BenchRow {
        detector: config.kind,
        train_seconds,
        test_seconds,
    })
}

/// Synthetic benchmark set: 1% planted outliers.
pub fn bench_dataset(n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    let outliers = (n / 100).max(1);
    synth_planted(n.saturating_sub(outliers), outliers, dim, 1.5, seed)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    let dataset = match &args.dataset {
        Some(path) => load_csv(
            path,
            LoadOptions {
                label_column: args.label_col.map_or(LabelColumn::Last, LabelColumn::Index),
                dedup: !args.keep_duplicates,
            },
        )?,
        None => bench_dataset(args.synthetic, args.dim, args.seed)?,
    };
    let rows = args
        .detectors
        .iter()
        .map(|&d| {
            let config = DetectorConfig::new(d.into()).with_models(args.m as usize);
            time_detector(&config, &dataset, args.seed)
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(path) = &args.output {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record([
            "detector",
            "dataset",
            "n",
            "d",
            "m",
            "train_seconds",
            "test_seconds",
            "total_seconds",
        ])?;
        for r in &rows {
            out.write_record([
                r.detector.to_string(),
                dataset.name.clone(),
                dataset.len().to_string(),
                dataset.dim().to_string(),
                args.m.to_string(),
                format!("{:.6}", r.train_seconds),
                format!("{:.6}", r.test_seconds),
                format!("{:.6}", r.total()),
            ])?;
        }
        out.flush()?;
    }
    println!(
        "{} (n={}, d={}), m={}",
        dataset.name,
        dataset.len(),
        dataset.dim(),
        args.m
    );
    for r in &rows {
        println!(
            "  {:<12} train {:>8.3}s  test {:>8.3}s  total {:>8.3}s",
            r.detector.to_string(),
            r.train_seconds,
            r.test_seconds,
            r.total()
        );
    }
    Ok(rows)
}

/// Runs a parsed command and maps the outcome to a process exit code:
/// 0 on success, 1 on runtime failure. Usage errors are reported by the
/// argument parser itself with code 2.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Eval(a) => cmd_eval(a).map(drop),
        Command::Collab(a) => cmd_collab(a).map(drop),
        Command::Bench(a) => cmd_bench(a).map(drop),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
