//! Dataset ingestion and synthetic generators.

use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::ball_count;
use crate::hashing::{compute_feature_stats, FeatureStats};
use crate::rng::stream;

/// Row-major `n × d` matrix of points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    values: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize) -> Self {
        Points {
            dim,
            values: Vec::new(),
        }
    }

    pub fn from_flat(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} values cannot form rows of dimension {dim}",
                values.len()
            )));
        }
        Ok(Points { dim, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().ok_or(Error::EmptyDataset)?.as_ref().len();
        let mut points = Points::new(dim);
        for row in rows {
            points.push(row.as_ref())?;
        }
        Ok(points)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim.max(1))
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Points {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Points { dim: self.dim, values }
    }
}

/// A labelled dataset; label `true` marks an outlier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub points: Points,
    pub labels: Vec<bool>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, points: Points, labels: Vec<bool>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if points.len() != labels.len() {
            return Err(Error::LengthMismatch {
                scores: points.len(),
                labels: labels.len(),
            });
        }
        Ok(Dataset {
            name: name.into(),
            points,
            labels,
            provenance: String::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Subset with the rows at `indices` (order preserved).
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Dataset {
        Dataset {
            name: name.into(),
            points: self.points.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Drops exact feature-vector duplicates, keeping the first occurrence
    /// and its label. Returns the number of rows removed.
    pub fn dedup(&mut self) -> usize {
        let mut seen = HashSet::with_capacity(self.len());
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let key: Vec<u64> = self.points.row(i).iter().map(|v| canonical_bits(*v)).collect();
                seen.insert(key)
            })
            .collect();
        let removed = self.len() - keep.len();
        if removed > 0 {
            self.points = self.points.select(&keep);
            self.labels = keep.iter().map(|&i| self.labels[i]).collect();
        }
        removed
    }
}

// -0.0 and 0.0 compare equal as features.
fn canonical_bits(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadOptions {
    pub label_column: LabelColumn,
    pub dedup: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            label_column: LabelColumn::Last,
            dedup: true,
        }
    }
}

/// Reference sizes `(name, n, d, outliers)` of the benchmark collection.
pub const BENCHMARK_SIZES: &[(&str, usize, usize, usize)] = &[
    ("breastw", 683, 9, 239),
    ("pima", 768, 8, 268),
    ("cardio", 1822, 21, 175),
    ("mnist", 7603, 100, 700),
    ("musk", 3062, 166, 97),
    ("pendigits", 6870, 16, 156),
    ("satimage", 5801, 36, 69),
    ("thyroid", 3656, 6, 93),
    ("shuttle", 49097, 9, 3511),
    ("cover", 286048, 54, 2747),
    ("kdd99", 48113, 40, 200),
];

/// Compares a dataset against the reference sizes for its name. Returns a
/// description of the mismatch, or `None` when it conforms or the name is
/// not a known benchmark.
pub fn check_benchmark_size(dataset: &Dataset) -> Option<String> {
    let key = dataset.name.to_ascii_lowercase();
    let &(name, n, d, o) = BENCHMARK_SIZES.iter().find(|(name, ..)| key.starts_with(name))?;
    let got = (dataset.len(), dataset.dim(), dataset.outliers());
    (got != (n, d, o)).then(|| {
        format!(
            "{name}: expected (n, d, o) = ({n}, {d}, {o}), loaded ({}, {}, {})",
            got.0, got.1, got.2
        )
    })
}

pub fn load_csv(path: impl AsRef<Path>, options: LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut dataset = parse_csv(&name, &text, options)?;
    dataset.provenance = path.display().to_string();
    if let Some(mismatch) = check_benchmark_size(&dataset) {
        warn!("benchmark size mismatch: {mismatch}");
    }
    Ok(dataset)
}

/// Parses CSV text. A first row containing any non-numeric cell is treated
/// as a header. Row numbers in errors are 1-based file lines.
pub fn parse_csv(name: &str, text: &str, options: LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut width = None;
    let mut points: Option<Points> = None;
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let row = line + 1;
        let record = record?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if line == 0 && parsed.iter().any(Option::is_none) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row,
                message: format!("expected {w} columns, found {}", record.len()),
            });
        }
        if w < 2 {
            return Err(Error::Parse {
                row,
                message: "need at least one feature column and a label column".into(),
            });
        }
        let label_idx = match options.label_column {
            LabelColumn::Last => w - 1,
            LabelColumn::Index(i) if i < w => i,
            LabelColumn::Index(i) => {
                return Err(Error::Parse {
                    row,
                    message: format!("label column {i} out of range for {w} columns"),
                })
            }
        };
        let mut features = Vec::with_capacity(w - 1);
        for (col, value) in parsed.iter().enumerate() {
            let v = value.filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                row,
                message: format!("non-numeric cell {:?} in column {col}", &record[col]),
            })?;
            if col == label_idx {
                labels.push(match v {
                    0.0 => false,
                    1.0 => true,
                    _ => {
                        return Err(Error::Parse {
                            row,
                            message: format!("label must be 0 or 1, found {v}"),
                        })
                    }
                });
            } else {
                features.push(v);
            }
        }
        points.get_or_insert_with(|| Points::new(w - 1)).push(&features)?;
    }

    let points = points.ok_or(Error::EmptyDataset)?;
    let mut dataset = Dataset::new(name, points, labels)?;
    if options.dedup {
        dataset.dedup();
    }
    Ok(dataset)
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..dataset.dim()).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    writer.write_record(&header)?;
    for (row, &label) in dataset.points.iter().zip(&dataset.labels) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(u8::from(label).to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// A standard Gaussian cluster of inliers plus outliers placed uniformly on
/// a sphere of radius `separation × (largest inlier norm)`.
pub fn synth_planted(n_inliers: usize, n_outliers: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if separation <= 0.0 || !separation.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "separation must be positive, got {separation}"
        )));
    }
    if dim == 0 || n_inliers + n_outliers == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = stream(seed);
    let mut points = Points::new(dim);
    let mut max_norm: f64 = 0.0;
    for _ in 0..n_inliers {
        let row: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        max_norm = max_norm.max(norm(&row));
        points.push(&row)?;
    }
    let radius = separation * if n_inliers == 0 { 1.0 } else { max_norm };
    for _ in 0..n_outliers {
        let direction = loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let len = norm(&v);
            if len > 1e-12 {
                break v.into_iter().map(|x| x / len).collect::<Vec<_>>();
            }
        };
        let row: Vec<f64> = direction.iter().map(|x| x * radius).collect();
        points.push(&row)?;
    }
    let labels = (0..n_inliers + n_outliers).map(|i| i >= n_inliers).collect();
    let mut dataset = Dataset::new(format!("planted-{dim}d"), points, labels)?;
    dataset.provenance = format!("synth_planted(seed={seed}, separation={separation})");
    Ok(dataset)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A subsample with two probes whose weighted-ℓ1 ball counts differ by
/// construction.
#[derive(Clone, Debug)]
pub struct Lemma1Instance {
    pub points: Points,
    pub stats: FeatureStats,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub radius: f64,
    /// Exact `|B_S(q1, r)|`, confirmed by linear scan.
    pub ball1: usize,
    /// Exact `|B_S(q2, r)|`, confirmed by linear scan.
    pub ball2: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Lemma1Spec {
    pub subsample: usize,
    pub radius: f64,
    pub dim: usize,
    pub near_q1: usize,
    pub near_q2: usize,
}

impl Lemma1Spec {
    /// Defaults: three dimensions, 15% of the subsample around `q1` and
    /// 2.5% (at least one point) around `q2`.
    pub fn new(subsample: usize, radius: f64) -> Self {
        Lemma1Spec {
            subsample,
            radius,
            dim: 3,
            near_q1: subsample * 3 / 20,
            near_q2: (subsample / 40).max(1),
        }
    }
}

pub fn synth_lemma1(subsample: usize, radius: f64, seed: u64) -> Result<Lemma1Instance> {
    synth_lemma1_with(Lemma1Spec::new(subsample, radius), seed)
}

/// Builds the instance inside `[0, 1]^d` (two corner anchors pin every
/// range to exactly `[0, 1]`, so the weighted distance is plain ℓ1).
/// Ball members sit at ℓ1 distance uniform in `[0, r]` from their probe;
/// every other point is rejection-sampled to lie outside both balls.
pub fn synth_lemma1_with(spec: Lemma1Spec, seed: u64) -> Result<Lemma1Instance> {
    let Lemma1Spec {
        subsample,
        radius,
        dim,
        near_q1,
        near_q2,
    } = spec;
    if subsample < 20 {
        return Err(Error::InvalidParameter(format!(
            "subsample must be at least 20, got {subsample}"
        )));
    }
    if dim == 0 || !(radius > 0.0 && radius < 0.25) {
        return Err(Error::InvalidParameter(format!(
            "radius must lie in (0, 0.25), got {radius}"
        )));
    }
    if near_q1 <= near_q2 || near_q1 + near_q2 + 2 > subsample {
        return Err(Error::InvalidParameter(format!(
            "ball sizes {near_q1} and {near_q2} must be ordered and fit in {subsample} points"
        )));
    }

    let mut rng = stream(seed);
    // Probes sit symmetrically about the centre so background contributions
    // to both buckets have equal expectation.
    let q1 = vec![0.3; dim];
    let q2 = vec![0.7; dim];
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();

    let mut points = Points::new(dim);
    points.push(&vec![0.0; dim])?;
    points.push(&vec![1.0; dim])?;
    for (centre, count) in [(&q1, near_q1), (&q2, near_q2)] {
        for _ in 0..count {
            // Distance strictly inside the ball so boundary rounding cannot
            // move a point out of it.
            let target = radius * rng.random::<f64>() * (1.0 - 1e-9);
            let mut weights: Vec<f64> = (0..dim).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w *= target / total);
            let row: Vec<f64> = centre
                .iter()
                .zip(&weights)
                .map(|(c, w)| if rng.random::<bool>() { c + w } else { c - w })
                .collect();
            points.push(&row)?;
        }
    }
    while points.len() < subsample {
        let row: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        if l1(&row, &q1) > radius * (1.0 + 1e-9) && l1(&row, &q2) > radius * (1.0 + 1e-9) {
            points.push(&row)?;
        }
    }

    let stats = compute_feature_stats(&points)?;
    let ball1 = ball_count(&points, &q1, radius, &stats);
    let ball2 = ball_count(&points, &q2, radius, &stats);
    if ball1 != near_q1 || ball2 != near_q2 {
        return Err(Error::InvalidParameter(format!(
            "generated ball counts ({ball1}, {ball2}) differ from requested ({near_q1}, {near_q2})"
        )));
    }
    Ok(Lemma1Instance {
        points,
        stats,
        q1,
        q2,
        radius,
        ball1,
        ball2,
    })
}
