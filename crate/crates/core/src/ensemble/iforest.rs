//! Isolation forest baseline.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Points;
use crate::error::{Error, Result};
use crate::rng::{child_stream, derive_seed};

pub const FOREST_SUBSAMPLE: usize = 256;
pub const FOREST_HEIGHT_LIMIT: usize = 8;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful search in a binary search tree
/// over `n` keys; normalizes isolation depths.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        dim: usize,
        cut: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    /// Grows a tree over `rows` of `points`. Each split picks a dimension
    /// uniformly among those that still vary inside the node and a cut
    /// uniform in the node's range; points below the cut go left.
    pub fn build<R: Rng + ?Sized>(points: &Points, rows: Vec<usize>, height_limit: usize, rng: &mut R) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.grow(points, rows, 0, height_limit, rng);
        tree
    }

    fn grow<R: Rng + ?Sized>(
        &mut self,
        points: &Points,
        rows: Vec<usize>,
        depth: usize,
        height_limit: usize,
        rng: &mut R,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: rows.len() });
        if depth >= height_limit || rows.len() <= 1 {
            return id;
        }
        let dim_count = points.dim();
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); dim_count];
        for &r in &rows {
            for (range, &v) in ranges.iter_mut().zip(points.row(r)) {
                range.0 = range.0.min(v);
                range.1 = range.1.max(v);
            }
        }
        let varying: Vec<usize> = (0..dim_count).filter(|&i| ranges[i].0 < ranges[i].1).collect();
        if varying.is_empty() {
            return id;
        }
        let dim = varying[rng.random_range(0..varying.len())];
        let (lo, hi) = ranges[dim];
        let cut = lo + (hi - lo) * rng.random::<f64>();
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| points.row(r)[dim] < cut);
        let left = self.grow(points, left_rows, depth + 1, height_limit, rng);
        let right = self.grow(points, right_rows, depth + 1, height_limit, rng);
        self.nodes[id] = Node::Split { dim, cut, left, right };
        id
    }

    /// Number of edges from the root to the leaf reached by `x`, plus the
    /// expected remaining depth `c(size)` of that leaf.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let (depth, size) = self.leaf_of(x);
        depth as f64 + average_path_length(size)
    }

    /// Depth of the leaf reached by `x` and the leaf's training size.
    pub fn leaf_of(&self, x: &[f64]) -> (usize, usize) {
        let mut node = 0;
        let mut depth = 0;
        loop {
            match self.nodes[node] {
                Node::Split { dim, cut, left, right } => {
                    node = if x[dim] < cut { left } else { right };
                    depth += 1;
                }
                Node::Leaf { size } => return (depth, size),
            }
        }
    }

    pub fn height(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Score is `2^(−E[h(q)] / c(ψ))`; higher means more outlying.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestModel {
    pub trees: Vec<IsolationTree>,
    pub subsample: usize,
    pub height_limit: usize,
}

impl IsolationForestModel {
    pub fn mean_path_length(&self, q: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(q)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let norm = average_path_length(self.subsample);
        if norm == 0.0 {
            return 0.5;
        }
        (-self.mean_path_length(q) / norm).exp2()
    }

    pub fn scores(&self, points: &Points) -> Vec<f64> {
        points.iter().map(|q| self.score(q)).collect()
    }
}

pub fn iforest_train(
    points: &Points,
    trees: usize,
    subsample: usize,
    height_limit: usize,
    master_seed: u64,
) -> Result<IsolationForestModel> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if trees == 0 || subsample == 0 {
        return Err(Error::InvalidParameter(
            "forest needs at least one tree and a positive subsample".into(),
        ));
    }
    let psi = subsample.min(points.len());
    let trees = (0..trees)
        .map(|t| {
            let mut rng = child_stream(master_seed, t as u64);
            let rows = index::sample(&mut rng, points.len(), psi).into_vec();
            IsolationTree::build(points, rows, height_limit, &mut rng)
        })
        .collect();
    Ok(IsolationForestModel {
        trees,
        subsample: psi,
        height_limit,
    })
}

/// A participant's forest trained only on its own shard. Scoring fails for
/// participants whose shard was empty.
#[derive(Clone, Debug)]
pub struct LocalForest {
    pub participant: usize,
    pub model: Option<IsolationForestModel>,
}

impl LocalForest {
    pub fn score(&self, q: &[f64]) -> Result<f64> {
        self.model
            .as_ref()
            .map(|m| m.score(q))
            .ok_or(Error::EmptyShard(self.participant))
    }

    pub fn scores(&self, points: &Points) -> Result<Vec<f64>> {
        let model = self.model.as_ref().ok_or(Error::EmptyShard(self.participant))?;
        Ok(model.scores(points))
    }
}

/// Decentralized iForest: every participant trains on its shard alone and
/// nothing is merged.
pub fn iforest_local_only_train(shards: &[Points], trees: usize, master_seed: u64) -> Result<Vec<LocalForest>> {
    shards
        .iter()
        .enumerate()
        .map(|(p, shard)| {
            let model = if shard.is_empty() {
                None
            } else {
                Some(iforest_train(
                    shard,
                    trees,
                    FOREST_SUBSAMPLE,
                    FOREST_HEIGHT_LIMIT,
                    derive_seed(master_seed, p as u64),
                )?)
            };
            Ok(LocalForest { participant: p, model })
        })
        .collect()
}
