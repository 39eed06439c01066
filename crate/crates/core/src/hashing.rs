//! Hash families: random-feature LSH, random-projection LSH, and the
//! per-dimension grid quantizer of randomized subspace hashing.
//!
//! A random-feature function picks one dimension `i` and a cut `c` drawn
//! uniformly from that dimension's range and returns the bit `x_i >= c`.
//! Two points collide with probability `1 - ℓ'1(x, q) / d`, where `ℓ'1`
//! weights dimension `i` by `1 / (max_i - min_i)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Points;
use crate::error::{Error, Result};

/// Largest supported number of concatenated functions; histograms hold `2^l`
/// cells.
pub const MAX_HASH_COUNT: usize = 20;

/// Per-dimension ranges of a reference point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StatsRecord", into = "StatsRecord")]
pub struct FeatureStats {
    min: Vec<f64>,
    max: Vec<f64>,
    degenerate: Vec<bool>,
    active: Vec<usize>,
}

impl FeatureStats {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                got: max.len(),
            });
        }
        if let Some(i) =
            (0..min.len()).find(|&i| matches!(min[i].partial_cmp(&max[i]), None | Some(std::cmp::Ordering::Greater)))
        {
            return Err(Error::InvalidParameter(format!(
                "dimension {i}: min {} exceeds max {}",
                min[i], max[i]
            )));
        }
        let degenerate: Vec<bool> = min.iter().zip(&max).map(|(a, b)| a == b).collect();
        let active = (0..min.len()).filter(|&i| !degenerate[i]).collect();
        Ok(FeatureStats {
            min,
            max,
            degenerate,
            active,
        })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn is_degenerate(&self, dim: usize) -> bool {
        self.degenerate[dim]
    }

    /// Indices of the dimensions with `min < max`.
    pub fn active_dims(&self) -> &[usize] {
        &self.active
    }

    pub fn range(&self, dim: usize) -> f64 {
        self.max[dim] - self.min[dim]
    }
}

/// Wire form: `(d, min, max, degeneracy bitmask)`, the mask written as a
/// string of `0`/`1` characters, one per dimension.
#[derive(Serialize, Deserialize)]
struct StatsRecord {
    d: usize,
    min: Vec<f64>,
    max: Vec<f64>,
    degenerate: String,
}

impl From<FeatureStats> for StatsRecord {
    fn from(s: FeatureStats) -> Self {
        StatsRecord {
            d: s.dim(),
            degenerate: s.degenerate.iter().map(|&b| if b { '1' } else { '0' }).collect(),
            min: s.min,
            max: s.max,
        }
    }
}

impl TryFrom<StatsRecord> for FeatureStats {
    type Error = Error;

    fn try_from(r: StatsRecord) -> Result<Self> {
        if r.d != r.min.len() || r.degenerate.len() != r.d {
            return Err(Error::DimensionMismatch {
                expected: r.d,
                got: r.min.len(),
            });
        }
        let stats = FeatureStats::new(r.min, r.max)?;
        let mask: Vec<bool> = r.degenerate.chars().map(|c| c == '1').collect();
        if mask != stats.degenerate {
            return Err(Error::InvalidParameter("degeneracy mask disagrees with ranges".into()));
        }
        Ok(stats)
    }
}

pub fn compute_feature_stats(points: &Points) -> Result<FeatureStats> {
    let mut rows = points.iter();
    let first = rows.next().ok_or(Error::EmptyDataset)?;
    let mut min = first.to_vec();
    let mut max = first.to_vec();
    for row in rows {
        for (i, &v) in row.iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    FeatureStats::new(min, max)
}

/// Parameters of one base model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseModelParams {
    /// Scaling `f`, drawn from `U[1/√s, 1 − 1/√s]`.
    pub scaling: f64,
    /// Number of concatenated hash functions `l`.
    pub hash_count: usize,
    /// Subsample size `s` the parameters were drawn for.
    pub subsample: usize,
    /// Seed of the model's private random stream.
    pub seed: u64,
}

/// Real interval from which `l` is drawn for subsample size `s` and
/// scaling `f`: `[1 + 0.5·log_b(s), log_b(s)]` with `b = max(2, 1/f)`.
/// Endpoints are returned in increasing order.
pub fn hash_count_interval(subsample: usize, scaling: f64) -> (f64, f64) {
    let base = (1.0 / scaling).max(2.0);
    let log_s = (subsample as f64).ln() / base.ln();
    let (a, b) = (1.0 + 0.5 * log_s, log_s);
    (a.min(b), a.max(b))
}

pub fn sample_base_params<R: Rng + ?Sized>(subsample: usize, rng: &mut R) -> Result<BaseModelParams> {
    if subsample < 2 {
        return Err(Error::SubsampleTooSmall(subsample));
    }
    let edge = 1.0 / (subsample as f64).sqrt();
    // For s < 4 the interval is inverted; draw between its endpoints.
    let (lo, hi) = (edge.min(1.0 - edge), edge.max(1.0 - edge));
    let scaling = lo + (hi - lo) * rng.random::<f64>();
    params_with_scaling(subsample, scaling, rng)
}

/// Draws `l` and the model seed for a fixed scaling `f`.
pub fn params_with_scaling<R: Rng + ?Sized>(subsample: usize, scaling: f64, rng: &mut R) -> Result<BaseModelParams> {
    if subsample < 2 {
        return Err(Error::SubsampleTooSmall(subsample));
    }
    if !(scaling > 0.0 && scaling < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "scaling must lie in (0, 1), got {scaling}"
        )));
    }
    let (lo, hi) = hash_count_interval(subsample, scaling);
    let draw = lo + (hi - lo) * rng.random::<f64>();
    let hash_count = (draw.round() as usize).clamp(1, MAX_HASH_COUNT);
    Ok(BaseModelParams {
        scaling,
        hash_count,
        subsample,
        seed: rng.random(),
    })
}

/// `h(x) = 1` iff `x[dim] >= cut`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfHashFunction {
    /// Zero-based dimension index.
    pub dim: usize,
    pub cut: f64,
}

impl RfHashFunction {
    #[inline]
    pub fn hash(&self, x: &[f64]) -> bool {
        x[self.dim] >= self.cut
    }
}

/// Concatenation `g = (h_1, …, h_l)` of random-feature functions. Bit `j`
/// of the bucket code is `h_{j+1}(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CompositeRecord", into = "CompositeRecord")]
pub struct CompositeHash {
    functions: Vec<RfHashFunction>,
}

/// Flat wire form: `l`, then `(dimension, cut)` pairs in order.
#[derive(Serialize, Deserialize)]
struct CompositeRecord {
    l: usize,
    functions: Vec<(usize, f64)>,
}

impl From<CompositeHash> for CompositeRecord {
    fn from(g: CompositeHash) -> Self {
        CompositeRecord {
            l: g.len(),
            functions: g.functions.iter().map(|h| (h.dim, h.cut)).collect(),
        }
    }
}

impl TryFrom<CompositeRecord> for CompositeHash {
    type Error = Error;

    fn try_from(r: CompositeRecord) -> Result<Self> {
        if r.l != r.functions.len() {
            return Err(Error::InvalidParameter(format!(
                "composite hash declares l = {} but lists {} functions",
                r.l,
                r.functions.len()
            )));
        }
        CompositeHash::new(
            r.functions
                .into_iter()
                .map(|(dim, cut)| RfHashFunction { dim, cut })
                .collect(),
        )
    }
}

impl CompositeHash {
    pub fn new(functions: Vec<RfHashFunction>) -> Result<Self> {
        if functions.is_empty() || functions.len() > MAX_HASH_COUNT {
            return Err(Error::InvalidParameter(format!(
                "composite hash needs 1..={MAX_HASH_COUNT} functions, got {}",
                functions.len()
            )));
        }
        Ok(CompositeHash { functions })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[RfHashFunction] {
        &self.functions
    }

    pub fn buckets(&self) -> usize {
        1 << self.functions.len()
    }

    #[inline]
    pub fn code(&self, x: &[f64]) -> usize {
        self.functions
            .iter()
            .enumerate()
            .fold(0, |code, (j, h)| code | (usize::from(h.hash(x)) << j))
    }
}

/// Samples `l` functions; dimensions are drawn uniformly with replacement
/// from the non-degenerate dimensions, cuts uniformly from their ranges.
pub fn sample_rf_composite<R: Rng + ?Sized>(
    stats: &FeatureStats,
    hash_count: usize,
    rng: &mut R,
) -> Result<CompositeHash> {
    let active = stats.active_dims();
    if active.is_empty() {
        return Err(Error::ConstantDataset);
    }
    let functions = (0..hash_count)
        .map(|_| {
            let dim = active[rng.random_range(0..active.len())];
            let cut = stats.min[dim] + stats.range(dim) * rng.random::<f64>();
            RfHashFunction { dim, cut }
        })
        .collect();
    CompositeHash::new(functions)
}

/// Weighted ℓ1 distance over the non-degenerate dimensions; dimension `i`
/// is weighted by `1 / (max_i − min_i)`.
pub fn weighted_l1(x: &[f64], q: &[f64], stats: &FeatureStats) -> f64 {
    stats
        .active_dims()
        .iter()
        .map(|&i| (x[i] - q[i]).abs() / stats.range(i))
        .sum()
}

/// Probability that a single random-feature function sends `x` and `q` to
/// the same bit. Per-dimension terms are clamped to `[0, 1]` so points
/// outside the reference ranges still get a probability.
pub fn rf_collision_prob(x: &[f64], q: &[f64], stats: &FeatureStats) -> f64 {
    let active = stats.active_dims();
    if active.is_empty() {
        return 1.0;
    }
    let spread: f64 = active
        .iter()
        .map(|&i| ((x[i] - q[i]).abs() / stats.range(i)).min(1.0))
        .sum();
    (1.0 - spread / active.len() as f64).clamp(0.0, 1.0)
}

/// p-stable (Gaussian) projection hash `⌊(x·a + b) / w⌋`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpHashFunction {
    pub projection: Vec<f64>,
    pub offset: f64,
    pub width: f64,
}

impl RpHashFunction {
    pub fn sample<R: Rng + ?Sized>(dim: usize, width: f64, rng: &mut R) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bucket width must be positive, got {width}"
            )));
        }
        Ok(RpHashFunction {
            projection: (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
            offset: width * rng.random::<f64>(),
            width,
        })
    }

    pub fn hash(&self, x: &[f64]) -> i64 {
        let dot: f64 = x.iter().zip(&self.projection).map(|(a, b)| a * b).sum();
        ((dot + self.offset) / self.width).floor() as i64
    }
}

/// RS-H grid coordinate `⌊((x − min)/(max − min) + α) / f⌋`.
#[inline]
pub fn rsh_quantize(x: f64, min: f64, max: f64, alpha: f64, scaling: f64) -> Result<i64> {
    if max <= min {
        return Err(Error::DegenerateDimension(min));
    }
    Ok((((x - min) / (max - min) + alpha) / scaling).floor() as i64)
}
