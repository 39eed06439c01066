use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Points;
use crate::error::{Error, Result};
use crate::hashing::{
    compute_feature_stats, sample_base_params, sample_rf_composite, BaseModelParams, CompositeHash, FeatureStats,
};
use crate::histogram::{Epsilon, Histogram};
use crate::rng::{child_stream, StreamRng};

/// Cap on the per-model subsample.
pub const MAX_SUBSAMPLE: usize = 1000;

pub fn subsample_size(n: usize) -> usize {
    n.min(MAX_SUBSAMPLE)
}

/// `min(s, n)` distinct row indices drawn uniformly without replacement.
pub fn subsample_rows<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Vec<usize> {
    index::sample(rng, n, s.min(n)).into_vec()
}

/// Parameters and hash functions of one base model, as distributed to every
/// participant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedHash {
    pub params: BaseModelParams,
    pub hash: CompositeHash,
}

impl SharedHash {
    /// Random stream a participant uses to subsample and noise this model.
    pub fn training_stream(&self, participant: usize) -> StreamRng {
        child_stream(self.params.seed, participant as u64)
    }
}

/// Draws `m` base-model parameter sets and composite hashes. Model `j` uses
/// its own stream derived from `master_seed`.
pub fn draw_shared_hashes(
    stats: &FeatureStats,
    subsample: usize,
    models: usize,
    master_seed: u64,
) -> Result<Vec<SharedHash>> {
    (0..models)
        .map(|j| {
            let mut rng = child_stream(master_seed, j as u64);
            let params = sample_base_params(subsample, &mut rng)?;
            let hash = sample_rf_composite(stats, params.hash_count, &mut rng)?;
            Ok(SharedHash { params, hash })
        })
        .collect()
}

/// Trains one base model: subsample `s` points without replacement, count
/// bucket codes, then release under `epsilon`.
pub fn train_base<R: Rng + ?Sized>(
    points: &Points,
    hash: &CompositeHash,
    subsample: usize,
    epsilon: Epsilon,
    rng: &mut R,
) -> Result<Histogram> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut histogram = Histogram::new(hash.len())?;
    for i in subsample_rows(points.len(), subsample, rng) {
        histogram.increment(hash.code(points.row(i)))?;
    }
    histogram.release(epsilon, rng)
}

/// `log2(max(count, 1))`; noisy negative counts score 0.
#[inline]
pub fn score_from_count(count: f64) -> f64 {
    count.max(1.0).log2()
}

pub fn score_base(histogram: &Histogram, hash: &CompositeHash, q: &[f64]) -> f64 {
    score_from_count(histogram.count_at(hash.code(q)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseModel {
    pub params: BaseModelParams,
    pub hash: CompositeHash,
    pub histogram: Histogram,
}

impl BaseModel {
    pub fn new(shared: SharedHash, histogram: Histogram) -> Result<Self> {
        if histogram.hash_count() != shared.hash.len() || shared.params.hash_count != shared.hash.len() {
            return Err(Error::IncompatibleHistograms(format!(
                "histogram for l = {} paired with a composite hash of length {}",
                histogram.hash_count(),
                shared.hash.len()
            )));
        }
        Ok(BaseModel {
            params: shared.params,
            hash: shared.hash,
            histogram,
        })
    }

    #[inline]
    pub fn score(&self, q: &[f64]) -> f64 {
        score_base(&self.histogram, &self.hash, q)
    }
}

/// Trained LSH iTables ensemble. The score is the mean of the base scores;
/// lower means more outlying.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ITablesModel {
    pub stats: FeatureStats,
    pub models: Vec<BaseModel>,
    pub master_seed: u64,
}

impl ITablesModel {
    pub fn new(stats: FeatureStats, models: Vec<BaseModel>, master_seed: u64) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidParameter("ensemble needs at least one base model".into()));
        }
        if let Some(bad) = models
            .iter()
            .find(|m| m.hash.functions().iter().any(|h| h.dim >= stats.dim()))
        {
            return Err(Error::DimensionMismatch {
                expected: stats.dim(),
                got: bad.hash.functions().iter().map(|h| h.dim + 1).max().unwrap_or(0),
            });
        }
        Ok(ITablesModel {
            stats,
            models,
            master_seed,
        })
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        self.models.iter().map(|m| m.score(q)).sum::<f64>() / self.models.len() as f64
    }

    pub fn scores(&self, points: &Points) -> Vec<f64> {
        points.iter().map(|q| self.score(q)).collect()
    }
}

/// Centralized training on `points`: feature ranges over all points,
/// `s = min(1000, n)`, and `m` independently drawn base models.
pub fn lsh_itables_train(points: &Points, models: usize, epsilon: Epsilon, master_seed: u64) -> Result<ITablesModel> {
    let stats = compute_feature_stats(points)?;
    let s = subsample_size(points.len());
    let shared = draw_shared_hashes(&stats, s, models, master_seed)?;
    let base = shared
        .into_iter()
        .map(|sh| {
            let histogram = train_base(points, &sh.hash, s, epsilon, &mut sh.training_stream(0))?;
            BaseModel::new(sh, histogram)
        })
        .collect::<Result<Vec<_>>>()?;
    ITablesModel::new(stats, base, master_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_planted;
    use crate::hashing::RfHashFunction;
    use crate::rng::stream;

    #[test]
    fn median_cut_splits_evenly() {
        let pts = Points::from_rows(&(0..10).map(|i| [i as f64]).collect::<Vec<_>>()).unwrap();
        let g = CompositeHash::new(vec![RfHashFunction { dim: 0, cut: 4.5 }]).unwrap();
        let h = train_base(&pts, &g, 10, Epsilon::Infinite, &mut stream(0)).unwrap();
        assert_eq!(h.counts(), &[5.0, 5.0]);
    }

    #[test]
    fn conservation_and_clamping() {
        let data = synth_planted(40, 3, 2, 3.0, 2).unwrap();
        let stats = compute_feature_stats(&data.points).unwrap();
        let g = sample_rf_composite(&stats, 4, &mut stream(1)).unwrap();
        let h = train_base(&data.points, &g, 25, Epsilon::Infinite, &mut stream(2)).unwrap();
        assert_eq!(h.total(), 25.0);
        let all = train_base(&data.points, &g, 500, Epsilon::Infinite, &mut stream(3)).unwrap();
        assert_eq!(all.total(), 43.0);
        assert!(matches!(
            train_base(&Points::new(2), &g, 5, Epsilon::Infinite, &mut stream(4)),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn base_scores() {
        assert_eq!(score_from_count(1.0), 0.0);
        assert_eq!(score_from_count(8.0), 3.0);
        assert_eq!(score_from_count(-2.7), 0.0);
        assert_eq!(score_from_count(0.4), 0.0);
    }

    #[test]
    fn single_model_score_equals_base_score() {
        let data = synth_planted(80, 4, 3, 4.0, 5).unwrap();
        let model = lsh_itables_train(&data.points, 1, Epsilon::Infinite, 3).unwrap();
        for q in data.points.iter() {
            assert_eq!(model.score(q), model.models[0].score(q));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = synth_planted(120, 5, 4, 4.0, 6).unwrap();
        let a = lsh_itables_train(&data.points, 20, Epsilon::Infinite, 77).unwrap();
        let b = lsh_itables_train(&data.points, 20, Epsilon::Infinite, 77).unwrap();
        assert_eq!(a, b);
        let c = lsh_itables_train(&data.points, 20, Epsilon::Infinite, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn subsample_follows_min_rule() {
        let data = synth_planted(495, 5, 3, 4.0, 7).unwrap();
        let model = lsh_itables_train(&data.points, 10, Epsilon::Infinite, 1).unwrap();
        for m in &model.models {
            assert_eq!(m.params.subsample, 500);
            assert_eq!(m.histogram.total(), 500.0);
        }
    }

    #[test]
    fn constant_data_is_rejected() {
        let pts = Points::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(matches!(
            lsh_itables_train(&pts, 3, Epsilon::Infinite, 0),
            Err(Error::ConstantDataset)
        ));
    }
}
