//! Ensemble detectors: LSH iTables and the two baselines.
//!
//! Hash-table detectors produce an *inlierness* score (a large bucket means a
//! dense region) while isolation forest produces an *outlierness* score.
//! Every model reports its [`Orientation`] so AUC computation never has to
//! guess.

mod iforest;
mod itables;
mod rsh;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Points;
use crate::error::{Error, Result};
use crate::histogram::Epsilon;

pub use iforest::{
    average_path_length, iforest_local_only_train, iforest_train, IsolationForestModel, IsolationTree, LocalForest,
    FOREST_HEIGHT_LIMIT, FOREST_SUBSAMPLE,
};
pub use itables::{
    draw_shared_hashes, lsh_itables_train, score_base, score_from_count, subsample_rows, subsample_size, train_base,
    BaseModel, ITablesModel, SharedHash, MAX_SUBSAMPLE,
};
pub use rsh::{draw_rsh_specs, rsh_train, RshBaseModel, RshHasher, RshModel, RshSpec};

/// Direction in which a score indicates an outlier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    HigherIsOutlier,
    LowerIsOutlier,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::HigherIsOutlier => Orientation::LowerIsOutlier,
            Orientation::LowerIsOutlier => Orientation::HigherIsOutlier,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::HigherIsOutlier => "higher-is-outlier",
            Orientation::LowerIsOutlier => "lower-is-outlier",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    LshITables,
    RsH,
    IForest,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::LshITables, DetectorKind::RsH, DetectorKind::IForest];

    pub fn orientation(self) -> Orientation {
        match self {
            DetectorKind::LshITables | DetectorKind::RsH => Orientation::LowerIsOutlier,
            DetectorKind::IForest => Orientation::HigherIsOutlier,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::LshITables => "lsh-itables",
            DetectorKind::RsH => "rs-h",
            DetectorKind::IForest => "iforest",
        })
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lsh-itables" | "itables" => Ok(DetectorKind::LshITables),
            "rs-h" | "rsh" => Ok(DetectorKind::RsH),
            "iforest" => Ok(DetectorKind::IForest),
            _ => Err(Error::InvalidParameter(format!("unknown detector {s:?}"))),
        }
    }
}

/// Everything needed to train one detector, apart from data and seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    /// Number of base models `m`.
    pub models: usize,
    /// Release budget for hash-table detectors; ignored by iForest.
    pub epsilon: Epsilon,
    pub forest_subsample: usize,
    pub height_limit: usize,
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind) -> Self {
        DetectorConfig {
            kind,
            models: 100,
            epsilon: Epsilon::Infinite,
            forest_subsample: FOREST_SUBSAMPLE,
            height_limit: FOREST_HEIGHT_LIMIT,
        }
    }

    pub fn with_models(mut self, models: usize) -> Self {
        self.models = models;
        self
    }

    pub fn with_epsilon(mut self, epsilon: Epsilon) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn fit(&self, points: &Points, seed: u64) -> Result<EnsembleModel> {
        if self.models == 0 {
            return Err(Error::InvalidParameter("need at least one base model".into()));
        }
        Ok(match self.kind {
            DetectorKind::LshITables => {
                EnsembleModel::ITables(lsh_itables_train(points, self.models, self.epsilon, seed)?)
            }
            DetectorKind::RsH => EnsembleModel::Rsh(rsh_train(points, self.models, self.epsilon, seed)?),
            DetectorKind::IForest => EnsembleModel::IForest(iforest_train(
                points,
                self.models,
                self.forest_subsample,
                self.height_limit,
                seed,
            )?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "detector", rename_all = "kebab-case")]
pub enum EnsembleModel {
    ITables(ITablesModel),
    Rsh(RshModel),
    IForest(IsolationForestModel),
}

impl EnsembleModel {
    pub fn kind(&self) -> DetectorKind {
        match self {
            EnsembleModel::ITables(_) => DetectorKind::LshITables,
            EnsembleModel::Rsh(_) => DetectorKind::RsH,
            EnsembleModel::IForest(_) => DetectorKind::IForest,
        }
    }

    pub fn orientation(&self) -> Orientation {
        self.kind().orientation()
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        match self {
            EnsembleModel::ITables(m) => m.score(q),
            EnsembleModel::Rsh(m) => m.score(q),
            EnsembleModel::IForest(m) => m.score(q),
        }
    }

    pub fn scores(&self, points: &Points) -> Vec<f64> {
        points.iter().map(|q| self.score(q)).collect()
    }
}

/// Writes per-point scores as CSV `(point_id, score, orientation)`.
pub fn write_scores<W: std::io::Write>(writer: W, scores: &[f64], orientation: Orientation) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["point_id", "score", "orientation"])?;
    let orientation = orientation.to_string();
    for (i, s) in scores.iter().enumerate() {
        out.write_record([i.to_string(), s.to_string(), orientation.clone()])?;
    }
    out.flush()?;
    Ok(())
}
