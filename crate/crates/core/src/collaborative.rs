//! In-process simulation of collaborative detection among `k` participants.
//!
//! A coordinator publishes the shared hash specification. Each participant
//! trains every base model on its own shard, releases the (optionally noisy)
//! result, and, after all releases are in, merges everyone's releases and
//! scores its own points. Participants only ever see their own raw points;
//! everything they exchange goes through the JSON messages defined here and
//! is recorded in a [`Transcript`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Points};
use crate::ensemble::{
    draw_rsh_specs, draw_shared_hashes, subsample_size, train_base, BaseModel, ITablesModel, Orientation, RshBaseModel,
    RshModel, RshSpec, SharedHash,
};
use crate::error::{Error, Result};
use crate::evaluation::auc;
use crate::hashing::{compute_feature_stats, FeatureStats};
use crate::histogram::{CountMinSketch, Epsilon, Histogram, HistogramMessage, SketchMessage};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum PartitionStrategy {
    /// Near-equal shards of uniformly shuffled points.
    UniformRandom,
    /// `fraction` of the labelled outliers go to participant 0. With
    /// `first_inliers = Some(c)`, participant 0 also receives exactly `c`
    /// inliers and everything else is spread over the other participants;
    /// otherwise the remaining points are spread over all participants.
    OutlierSkewed {
        fraction: f64,
        first_inliers: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub participants: usize,
    pub strategy: PartitionStrategy,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn uniform(participants: usize, seed: u64) -> Self {
        PartitionSpec {
            participants,
            strategy: PartitionStrategy::UniformRandom,
            seed,
        }
    }

    pub fn outlier_skewed(participants: usize, fraction: f64, first_inliers: Option<usize>, seed: u64) -> Self {
        PartitionSpec {
            participants,
            strategy: PartitionStrategy::OutlierSkewed {
                fraction,
                first_inliers,
            },
            seed,
        }
    }
}

fn deal(indices: &[usize], shards: &mut [Vec<usize>]) {
    let k = shards.len();
    let base = indices.len() / k;
    let extra = indices.len() % k;
    let mut start = 0;
    for (p, shard) in shards.iter_mut().enumerate() {
        let size = base + usize::from(p < extra);
        shard.extend_from_slice(&indices[start..start + size]);
        start += size;
    }
}

/// Splits row indices into `k` disjoint shards covering the dataset. Each
/// shard lists its rows in dataset order.
pub fn partition(dataset: &Dataset, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>> {
    let n = dataset.len();
    let k = spec.participants;
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} points among {k} participants"
        )));
    }
    let mut rng = stream(spec.seed);
    let mut shards = vec![Vec::new(); k];
    match spec.strategy {
        PartitionStrategy::UniformRandom => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            deal(&order, &mut shards);
        }
        PartitionStrategy::OutlierSkewed {
            fraction,
            first_inliers,
        } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidParameter(format!(
                    "skew fraction must lie in [0, 1], got {fraction}"
                )));
            }
            let (mut outliers, mut inliers): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| dataset.labels[i]);
            outliers.shuffle(&mut rng);
            inliers.shuffle(&mut rng);
            let routed = (fraction * outliers.len() as f64).round() as usize;
            shards[0].extend_from_slice(&outliers[..routed]);
            let mut rest: Vec<usize> = outliers[routed..].to_vec();
            match first_inliers {
                Some(c) => {
                    if c > inliers.len() {
                        return Err(Error::InvalidParameter(format!(
                            "asked for {c} inliers on participant 0, only {} exist",
                            inliers.len()
                        )));
                    }
                    shards[0].extend_from_slice(&inliers[..c]);
                    rest.extend_from_slice(&inliers[c..]);
                    rest.shuffle(&mut rng);
                    if k == 1 {
                        shards[0].extend_from_slice(&rest);
                    } else {
                        deal(&rest, &mut shards[1..]);
                    }
                }
                None => {
                    rest.extend_from_slice(&inliers);
                    rest.shuffle(&mut rng);
                    deal(&rest, &mut shards);
                }
            }
        }
    }
    for shard in &mut shards {
        shard.sort_unstable();
    }
    Ok(shards)
}

/// Materialized shards, named `<dataset>#p<id>`.
pub fn shard_datasets(dataset: &Dataset, spec: &PartitionSpec) -> Result<Vec<Dataset>> {
    Ok(partition(dataset, spec)?
        .iter()
        .enumerate()
        .map(|(p, rows)| dataset.subset(format!("{}#p{p}", dataset.name), rows))
        .collect())
}

/// Budget bookkeeping. Merging releases from participants spending `ε_i`
/// each yields a `Σ ε_i` release.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAccount {
    pub per_participant: Vec<Epsilon>,
    pub total: Epsilon,
    /// Histograms each participant released with its full `ε`.
    pub releases_per_participant: usize,
}

impl PrivacyAccount {
    pub fn new(per_participant: Vec<Epsilon>, releases_per_participant: usize) -> Self {
        let total = sum_budgets(&per_participant);
        PrivacyAccount {
            per_participant,
            total,
            releases_per_participant,
        }
    }

    /// Budget when the base-model releases of one participant are also
    /// composed sequentially: `m · Σ ε_i`.
    pub fn sequential_total(&self) -> Epsilon {
        match self.total {
            Epsilon::Finite(e) => Epsilon::Finite(e * self.releases_per_participant as f64),
            Epsilon::Infinite => Epsilon::Infinite,
        }
    }
}

fn sum_budgets(budgets: &[Epsilon]) -> Epsilon {
    budgets
        .iter()
        .try_fold(0.0, |acc, e| match e {
            Epsilon::Finite(v) => Some(acc + v),
            Epsilon::Infinite => None,
        })
        .map_or(Epsilon::Infinite, Epsilon::Finite)
}

/// Messages exchanged during a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Message {
    /// Shared LSH iTables hash specification.
    HashSpec {
        stats: FeatureStats,
        hashes: Vec<SharedHash>,
    },
    /// Shared RS-H grid and sketch layout.
    RshSpec {
        stats: FeatureStats,
        specs: Vec<RshSpec>,
    },
    Histogram(HistogramMessage),
    Sketch(SketchMessage),
}

/// Ordered log of every serialized message of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    lines: Vec<String>,
}

impl Transcript {
    fn post(&mut self, message: &Message) -> Result<usize> {
        self.lines.push(serde_json::to_string(message)?);
        Ok(self.lines.len() - 1)
    }

    fn read(&self, id: usize) -> Result<Message> {
        Ok(serde_json::from_str(&self.lines[id])?)
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn messages(&self) -> Result<Vec<Message>> {
        (0..self.lines.len()).map(|i| self.read(i)).collect()
    }

    /// Writes one JSON message per line.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for line in &self.lines {
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollabConfig {
    pub partition: PartitionSpec,
    /// Number of base models `m`.
    pub models: usize,
    /// One budget per participant.
    pub epsilons: Vec<Epsilon>,
    pub master_seed: u64,
}

impl CollabConfig {
    pub fn new(partition: PartitionSpec, models: usize, epsilon: Epsilon, master_seed: u64) -> Self {
        CollabConfig {
            epsilons: vec![epsilon; partition.participants],
            partition,
            models,
            master_seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParticipantOutcome<M> {
    pub id: usize,
    pub shard_size: usize,
    pub outliers: usize,
    /// `None` when the shard is empty or holds a single class.
    pub auc: Option<f64>,
    /// Global model this participant assembled from all releases.
    pub merged: Option<M>,
}

#[derive(Clone, Debug)]
pub struct CollabReport<M> {
    pub participants: Vec<ParticipantOutcome<M>>,
    /// Mean of the defined participant AUCs.
    pub mean_auc: f64,
    pub account: PrivacyAccount,
    pub transcript: Transcript,
}

impl<M> CollabReport<M> {
    pub fn participant_aucs(&self) -> Vec<Option<f64>> {
        self.participants.iter().map(|p| p.auc).collect()
    }
}

/// Detector-specific half of the protocol.
trait Scheme {
    type Spec: Serialize + DeserializeOwned;
    type Model;

    fn setup(points: &Points, models: usize, seed: u64) -> Result<Message>;
    fn accept_spec(message: Message) -> Result<Self::Spec>;
    fn release(spec: &Self::Spec, shard: &Points, participant: usize, epsilon: Epsilon) -> Result<Vec<Message>>;
    fn assemble(spec: &Self::Spec, releases: Vec<Message>) -> Result<Self::Model>;
    fn score(model: &Self::Model, q: &[f64]) -> f64;
}

struct ITablesScheme;

impl Scheme for ITablesScheme {
    type Spec = (FeatureStats, Vec<SharedHash>);
    type Model = ITablesModel;

    fn setup(points: &Points, models: usize, seed: u64) -> Result<Message> {
        let stats = compute_feature_stats(points)?;
        let hashes = draw_shared_hashes(&stats, subsample_size(points.len()), models, seed)?;
        Ok(Message::HashSpec { stats, hashes })
    }

    fn accept_spec(message: Message) -> Result<Self::Spec> {
        match message {
            Message::HashSpec { stats, hashes } => Ok((stats, hashes)),
            other => Err(unexpected("hash-spec", &other)),
        }
    }

    fn release(spec: &Self::Spec, shard: &Points, participant: usize, epsilon: Epsilon) -> Result<Vec<Message>> {
        let s = subsample_size(shard.len());
        spec.1
            .iter()
            .enumerate()
            .map(|(j, shared)| {
                let mut rng = shared.training_stream(participant);
                let h = train_base(shard, &shared.hash, s, epsilon, &mut rng)?;
                Ok(Message::Histogram(HistogramMessage::new(&h, j, participant)?))
            })
            .collect()
    }

    fn assemble(spec: &Self::Spec, releases: Vec<Message>) -> Result<ITablesModel> {
        let mut per_model: Vec<Vec<Histogram>> = vec![Vec::new(); spec.1.len()];
        for message in releases {
            let Message::Histogram(h) = message else {
                return Err(unexpected("histogram", &message));
            };
            let slot = per_model
                .get_mut(h.model_id)
                .ok_or_else(|| Error::IncompatibleHistograms(format!("unknown model id {}", h.model_id)))?;
            slot.push(h.into_histogram()?);
        }
        let models = spec
            .1
            .iter()
            .zip(per_model)
            .map(|(shared, hists)| BaseModel::new(shared.clone(), Histogram::merge(&hists)?))
            .collect::<Result<Vec<_>>>()?;
        ITablesModel::new(spec.0.clone(), models, 0)
    }

    fn score(model: &ITablesModel, q: &[f64]) -> f64 {
        model.score(q)
    }
}

struct RshScheme;

impl Scheme for RshScheme {
    type Spec = Vec<RshSpec>;
    type Model = RshModel;

    fn setup(points: &Points, models: usize, seed: u64) -> Result<Message> {
        let stats = compute_feature_stats(points)?;
        let specs = draw_rsh_specs(&stats, subsample_size(points.len()), models, seed)?;
        Ok(Message::RshSpec { stats, specs })
    }

    fn accept_spec(message: Message) -> Result<Self::Spec> {
        match message {
            Message::RshSpec { specs, .. } => Ok(specs),
            other => Err(unexpected("rsh-spec", &other)),
        }
    }

    fn release(spec: &Self::Spec, shard: &Points, participant: usize, epsilon: Epsilon) -> Result<Vec<Message>> {
        spec.iter()
            .enumerate()
            .map(|(j, model)| {
                let sketch = model.train_local(shard, epsilon, &mut model.training_stream(participant))?;
                Ok(Message::Sketch(SketchMessage::new(&sketch, j, participant)?))
            })
            .collect()
    }

    fn assemble(spec: &Self::Spec, releases: Vec<Message>) -> Result<RshModel> {
        let mut per_model: Vec<Vec<CountMinSketch>> = vec![Vec::new(); spec.len()];
        for message in releases {
            let Message::Sketch(s) = message else {
                return Err(unexpected("sketch", &message));
            };
            let slot = per_model
                .get_mut(s.model_id)
                .ok_or_else(|| Error::IncompatibleHistograms(format!("unknown model id {}", s.model_id)))?;
            slot.push(s.into_sketch()?);
        }
        let models = spec
            .iter()
            .zip(per_model)
            .map(|(m, sketches)| {
                Ok(RshBaseModel {
                    params: m.params,
                    hasher: m.hasher.clone(),
                    sketch: CountMinSketch::merge(&sketches)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RshModel { models, master_seed: 0 })
    }

    fn score(model: &RshModel, q: &[f64]) -> f64 {
        model.score(q)
    }
}

fn unexpected(wanted: &str, got: &Message) -> Error {
    let kind = match got {
        Message::HashSpec { .. } => "hash-spec",
        Message::RshSpec { .. } => "rsh-spec",
        Message::Histogram(_) => "histogram",
        Message::Sketch(_) => "sketch",
    };
    Error::InvalidParameter(format!("expected a {wanted} message, received {kind}"))
}

fn run<S: Scheme>(dataset: &Dataset, config: &CollabConfig, keep_models: bool) -> Result<CollabReport<S::Model>> {
    let k = config.partition.participants;
    if config.epsilons.len() != k {
        return Err(Error::InvalidParameter(format!(
            "{} budgets given for {k} participants",
            config.epsilons.len()
        )));
    }
    if config.models == 0 {
        return Err(Error::InvalidParameter("need at least one base model".into()));
    }
    let shards = shard_datasets(dataset, &config.partition)?;
    let mut transcript = Transcript::default();

    // Coordinator: the only step with access to the full dataset.
    let spec_id = transcript.post(&S::setup(&dataset.points, config.models, config.master_seed)?)?;

    // Release phase. Each participant decodes the spec from the wire and
    // trains on its own shard only.
    let mut release_ids = Vec::new();
    for (p, shard) in shards.iter().enumerate() {
        if shard.is_empty() {
            warn!("participant {p} has an empty shard and releases nothing");
            continue;
        }
        let spec = S::accept_spec(transcript.read(spec_id)?)?;
        for message in S::release(&spec, &shard.points, p, config.epsilons[p])? {
            release_ids.push(transcript.post(&message)?);
        }
    }

    // Merge barrier: every participant assembles the same global model from
    // all releases, then scores its own shard.
    let mut outcomes = Vec::with_capacity(k);
    for (p, shard) in shards.iter().enumerate() {
        let spec = S::accept_spec(transcript.read(spec_id)?)?;
        let releases = release_ids
            .iter()
            .map(|&id| transcript.read(id))
            .collect::<Result<Vec<_>>>()?;
        let model = S::assemble(&spec, releases)?;
        let auc = if shard.is_empty() {
            None
        } else {
            let scores: Vec<f64> = shard.points.iter().map(|q| S::score(&model, q)).collect();
            match auc(&scores, &shard.labels, Orientation::LowerIsOutlier) {
                Ok(a) => Some(a),
                Err(Error::DegenerateLabels) => {
                    warn!("participant {p} holds a single class; excluded from AUC averaging");
                    None
                }
                Err(e) => return Err(e),
            }
        };
        outcomes.push(ParticipantOutcome {
            id: p,
            shard_size: shard.len(),
            outliers: shard.outliers(),
            auc,
            merged: keep_models.then_some(model),
        });
    }

    let defined: Vec<f64> = outcomes.iter().filter_map(|o| o.auc).collect();
    let mean_auc = if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(CollabReport {
        participants: outcomes,
        mean_auc,
        account: PrivacyAccount::new(config.epsilons.clone(), config.models),
        transcript,
    })
}

/// Collaborative LSH iTables. Merged models are kept in the report.
pub fn run_collaboration(dataset: &Dataset, config: &CollabConfig) -> Result<CollabReport<ITablesModel>> {
    run::<ITablesScheme>(dataset, config, true)
}

/// Collaborative RS-H with per-cell noise on every released sketch. Merged
/// sketches are dropped from the report to bound memory.
pub fn run_collaboration_rsh(dataset: &Dataset, config: &CollabConfig) -> Result<CollabReport<RshModel>> {
    run::<RshScheme>(dataset, config, false)
}
