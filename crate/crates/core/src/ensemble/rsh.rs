//! Randomized subspace hashing (RS-H).
//!
//! Each base model picks `l` distinct dimensions, shifts and scales them onto
//! a grid of cell width `f`, and counts grid cells in a CountMin sketch.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Points;
use crate::error::{Error, Result};
use crate::hashing::{compute_feature_stats, rsh_quantize, sample_base_params, BaseModelParams, FeatureStats};
use crate::histogram::{CountMinSketch, Epsilon, RowHash, SKETCH_DEPTH, SKETCH_WIDTH};
use crate::rng::{child_stream, hash_tuple, StreamRng};

use super::itables::{score_from_count, subsample_size};

/// Grid hasher over a subspace: dimension `dims[j]` with range
/// `[mins[j], maxs[j]]` and shift `alphas[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RshHasher {
    pub scaling: f64,
    pub dims: Vec<usize>,
    pub alphas: Vec<f64>,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl RshHasher {
    /// Picks `min(l, #non-degenerate dims)` distinct dimensions and shifts
    /// `α ~ U[0, f]`.
    pub fn sample<R: Rng + ?Sized>(stats: &FeatureStats, params: &BaseModelParams, rng: &mut R) -> Self {
        let active = stats.active_dims();
        let l = params.hash_count.min(active.len());
        let dims: Vec<usize> = index::sample(rng, active.len(), l)
            .into_iter()
            .map(|i| active[i])
            .collect();
        let alphas = dims.iter().map(|_| params.scaling * rng.random::<f64>()).collect();
        RshHasher {
            scaling: params.scaling,
            mins: dims.iter().map(|&d| stats.min()[d]).collect(),
            maxs: dims.iter().map(|&d| stats.max()[d]).collect(),
            dims,
            alphas,
        }
    }

    /// Sketch key of the grid cell containing `x`.
    #[inline]
    pub fn key(&self, x: &[f64]) -> u64 {
        hash_tuple((0..self.dims.len()).map(|j| {
            rsh_quantize(
                x[self.dims[j]],
                self.mins[j],
                self.maxs[j],
                self.alphas[j],
                self.scaling,
            )
            .expect("hasher dimensions are non-degenerate")
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RshBaseModel {
    pub params: BaseModelParams,
    pub hasher: RshHasher,
    pub sketch: CountMinSketch,
}

impl RshBaseModel {
    #[inline]
    pub fn score(&self, q: &[f64]) -> f64 {
        score_from_count(self.sketch.query(self.hasher.key(q)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RshModel {
    pub models: Vec<RshBaseModel>,
    pub master_seed: u64,
}

impl RshModel {
    pub fn score(&self, q: &[f64]) -> f64 {
        self.models.iter().map(|m| m.score(q)).sum::<f64>() / self.models.len() as f64
    }

    pub fn scores(&self, points: &Points) -> Vec<f64> {
        points.iter().map(|q| self.score(q)).collect()
    }
}

fn fill_sketch(
    sketch: &mut CountMinSketch,
    hasher: &RshHasher,
    points: &Points,
    rows: impl IntoIterator<Item = usize>,
) -> Result<()> {
    for i in rows {
        sketch.insert(hasher.key(points.row(i)))?;
    }
    Ok(())
}

/// Centralized RS-H. Each base model subsamples `min(1000, n)` points and
/// takes its grid ranges from that subsample.
pub fn rsh_train(points: &Points, models: usize, epsilon: Epsilon, master_seed: u64) -> Result<RshModel> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if models == 0 {
        return Err(Error::InvalidParameter("ensemble needs at least one base model".into()));
    }
    let n = points.len();
    let s = subsample_size(n);
    let base = (0..models)
        .map(|j| {
            let mut rng = child_stream(master_seed, j as u64);
            let params = sample_base_params(s, &mut rng)?;
            let rows = index::sample(&mut rng, n, s).into_vec();
            let stats = compute_feature_stats(&points.select(&rows))?;
            let hasher = RshHasher::sample(&stats, &params, &mut rng);
            let mut sketch = CountMinSketch::new(SKETCH_DEPTH, SKETCH_WIDTH, &mut rng)?;
            fill_sketch(&mut sketch, &hasher, points, rows)?;
            let sketch = sketch.release(epsilon, &mut rng)?;
            Ok(RshBaseModel { params, hasher, sketch })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RshModel {
        models: base,
        master_seed,
    })
}

/// Shared description of one RS-H base model for collaborative training:
/// grid hasher plus the sketch's row hashes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RshSpec {
    pub params: BaseModelParams,
    pub hasher: RshHasher,
    pub rows: Vec<RowHash>,
    pub width: usize,
}

impl RshSpec {
    pub fn training_stream(&self, participant: usize) -> StreamRng {
        child_stream(self.params.seed, participant as u64)
    }

    /// Builds and releases this model's sketch over a subsample of
    /// `min(1000, |local|)` local points.
    pub fn train_local<R: Rng + ?Sized>(
        &self,
        local: &Points,
        epsilon: Epsilon,
        rng: &mut R,
    ) -> Result<CountMinSketch> {
        if local.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let s = subsample_size(local.len());
        let mut sketch = CountMinSketch::with_rows(self.width, self.rows.clone())?;
        fill_sketch(&mut sketch, &self.hasher, local, index::sample(rng, local.len(), s))?;
        sketch.release(epsilon, rng)
    }
}

/// Coordinator-side draw of `m` RS-H specs against shared ranges.
pub fn draw_rsh_specs(stats: &FeatureStats, subsample: usize, models: usize, master_seed: u64) -> Result<Vec<RshSpec>> {
    if stats.active_dims().is_empty() {
        return Err(Error::ConstantDataset);
    }
    (0..models)
        .map(|j| {
            let mut rng = child_stream(master_seed, j as u64);
            let params = sample_base_params(subsample, &mut rng)?;
            let hasher = RshHasher::sample(stats, &params, &mut rng);
            let rows = (0..SKETCH_DEPTH).map(|_| RowHash::sample(&mut rng)).collect();
            Ok(RshSpec {
                params,
                hasher,
                rows,
                width: SKETCH_WIDTH,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_planted;
    use crate::rng::stream;
    use std::collections::HashSet;

    #[test]
    fn subspace_dimensions_are_distinct() {
        let data = synth_planted(300, 10, 8, 4.0, 1).unwrap();
        let model = rsh_train(&data.points, 30, Epsilon::Infinite, 5).unwrap();
        for m in &model.models {
            let unique: HashSet<_> = m.hasher.dims.iter().collect();
            assert_eq!(unique.len(), m.hasher.dims.len());
            assert_eq!(m.hasher.dims.len(), m.params.hash_count.min(8));
            assert!(m.hasher.alphas.iter().all(|&a| (0.0..=m.params.scaling).contains(&a)));
        }
    }

    #[test]
    fn isolated_cell_scores_zero() {
        let stats = FeatureStats::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let params = crate::hashing::params_with_scaling(100, 0.1, &mut stream(0)).unwrap();
        let hasher = RshHasher::sample(&stats, &params, &mut stream(1));
        let mut sketch = CountMinSketch::new(SKETCH_DEPTH, SKETCH_WIDTH, &mut stream(2)).unwrap();
        sketch.insert(hasher.key(&[0.95, 0.95])).unwrap();
        let model = RshBaseModel { params, hasher, sketch };
        assert_eq!(model.sketch.query(model.hasher.key(&[0.95, 0.95])), 1.0);
        assert_eq!(model.score(&[0.95, 0.95]), 0.0);
    }

    #[test]
    fn sketch_totals_match_subsample() {
        let data = synth_planted(200, 5, 3, 4.0, 3).unwrap();
        let model = rsh_train(&data.points, 5, Epsilon::Infinite, 2).unwrap();
        for m in &model.models {
            let row_total: f64 = m.sketch.counters()[..m.sketch.width()].iter().sum();
            assert_eq!(row_total, 205.0);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = synth_planted(100, 5, 3, 4.0, 4).unwrap();
        let a = rsh_train(&data.points, 8, Epsilon::Infinite, 11).unwrap();
        let b = rsh_train(&data.points, 8, Epsilon::Infinite, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shared_specs_merge_to_centralized_sketch() {
        let data = synth_planted(150, 6, 3, 4.0, 5).unwrap();
        let stats = compute_feature_stats(&data.points).unwrap();
        let specs = draw_rsh_specs(&stats, 150, 3, 9).unwrap();
        let (left, right): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|i| i % 2 == 0);
        for spec in &specs {
            let a = spec
                .train_local(&data.points.select(&left), Epsilon::Infinite, &mut stream(1))
                .unwrap();
            let b = spec
                .train_local(&data.points.select(&right), Epsilon::Infinite, &mut stream(2))
                .unwrap();
            let all = spec
                .train_local(&data.points, Epsilon::Infinite, &mut stream(3))
                .unwrap();
            let merged = CountMinSketch::merge([&a, &b]).unwrap();
            assert_eq!(merged.counters(), all.counters());
        }
    }
}
