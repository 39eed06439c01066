//! AUC, repeated evaluation, and brute-force oracles.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Points};
use crate::ensemble::{DetectorConfig, Orientation};
use crate::error::{Error, Result};
use crate::hashing::{weighted_l1, CompositeHash, FeatureStats};
use crate::histogram::Epsilon;
use crate::rng::derive_seed;

/// Area under the ROC curve via the Mann–Whitney statistic: the probability
/// that a random outlier outranks a random inlier, ties counting one half.
pub fn auc(scores: &[f64], labels: &[bool], orientation: Orientation) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidParameter(format!("score {bad} cannot be ranked")));
    }

    let sign = match orientation {
        Orientation::HigherIsOutlier => 1.0,
        Orientation::LowerIsOutlier => -1.0,
    };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| (sign * scores[a]).total_cmp(&(sign * scores[b])).then(a.cmp(&b)));

    // Sum of midranks of the outliers.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let value = sign * scores[order[start]];
        let mut end = start + 1;
        while end < order.len() && sign * scores[order[end]] == value {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        let tied_outliers = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += midrank * tied_outliers as f64;
        start = end;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Mean/std of AUC over repeated train-and-score cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub detector: String,
    pub dataset: String,
    pub runs: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub seconds: f64,
    pub epsilon: Epsilon,
    pub participants: usize,
    /// Individual run AUCs, in run order.
    #[serde(skip)]
    pub run_aucs: Vec<f64>,
}

impl EvalResult {
    pub fn from_runs(
        detector: impl Into<String>,
        dataset: impl Into<String>,
        run_aucs: Vec<f64>,
        seconds: f64,
        epsilon: Epsilon,
        participants: usize,
    ) -> Self {
        let (auc_mean, auc_std) = mean_std(&run_aucs);
        EvalResult {
            detector: detector.into(),
            dataset: dataset.into(),
            runs: run_aucs.len(),
            auc_mean,
            auc_std,
            seconds,
            epsilon,
            participants,
            run_aucs,
        }
    }

    pub const LEDGER_HEADER: [&'static str; 8] = [
        "detector",
        "dataset",
        "runs",
        "auc_mean",
        "auc_std",
        "seconds",
        "epsilon",
        "participants",
    ];

    pub fn ledger_record(&self) -> [String; 8] {
        [
            self.detector.clone(),
            self.dataset.clone(),
            self.runs.to_string(),
            format!("{:.6}", self.auc_mean),
            format!("{:.6}", self.auc_std),
            format!("{:.6}", self.seconds),
            self.epsilon.to_string(),
            self.participants.to_string(),
        ]
    }

    /// Appends this row to a CSV results ledger, writing the header when
    /// the file is new or empty.
    pub fn append_to_ledger(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let fresh = file.metadata()?.len() == 0;
        let mut writer = csv::Writer::from_writer(file);
        if fresh {
            writer.write_record(Self::LEDGER_HEADER)?;
        }
        writer.write_record(self.ledger_record())?;
        writer.flush()?;
        Ok(())
    }
}

/// Sample mean and standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `runs` independent train-and-score cycles of an arbitrary detector.
/// Run `r` receives seed `derive_seed(master_seed, r)`. Time covers the
/// detector calls only.
pub fn repeated_eval_with<F>(
    detector: &str,
    dataset: &Dataset,
    runs: usize,
    master_seed: u64,
    mut train_and_score: F,
) -> Result<EvalResult>
where
    F: FnMut(&Dataset, u64) -> Result<(Vec<f64>, Orientation)>,
{
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let mut aucs = Vec::with_capacity(runs);
    let mut seconds = 0.0;
    for r in 0..runs {
        let start = Instant::now();
        let (scores, orientation) = train_and_score(dataset, derive_seed(master_seed, r as u64))?;
        seconds += start.elapsed().as_secs_f64();
        aucs.push(auc(&scores, &dataset.labels, orientation)?);
    }
    Ok(EvalResult::from_runs(
        detector,
        dataset.name.clone(),
        aucs,
        seconds,
        Epsilon::Infinite,
        1,
    ))
}

pub fn repeated_eval(config: &DetectorConfig, dataset: &Dataset, runs: usize, master_seed: u64) -> Result<EvalResult> {
    let mut result = repeated_eval_with(&config.kind.to_string(), dataset, runs, master_seed, |ds, seed| {
        let model = config.fit(&ds.points, seed)?;
        Ok((model.scores(&ds.points), model.orientation()))
    })?;
    result.epsilon = config.epsilon;
    Ok(result)
}

/// `|B(q, r)|`: points within weighted-ℓ1 distance `r` of `q`, by linear scan.
pub fn ball_count(points: &Points, q: &[f64], radius: f64, stats: &FeatureStats) -> usize {
    points.iter().filter(|x| weighted_l1(x, q, stats) <= radius).count()
}

/// Exact bucket counts of `points` under `hash`, computed by a direct scan
/// that re-derives every bit without going through the histogram code.
pub fn exact_bucket_oracle(points: &Points, hash: &CompositeHash) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for x in points.iter() {
        let mut code = 0usize;
        let mut weight = 1usize;
        for h in hash.functions() {
            if x[h.dim] >= h.cut {
                code += weight;
            }
            weight *= 2;
        }
        *counts.entry(code).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::RfHashFunction;

    fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 1.0,
                        std::cmp::Ordering::Equal => 0.5,
                        std::cmp::Ordering::Less => 0.0,
                    };
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn auc_examples() {
        let labels = [true, true, false, false];
        assert_eq!(
            auc(&[2.0, 3.0, 0.0, 1.0], &labels, Orientation::HigherIsOutlier).unwrap(),
            1.0
        );
        assert_eq!(auc(&[1.0; 4], &labels, Orientation::HigherIsOutlier).unwrap(), 0.5);
        let scores = [3.0, 1.0, 2.0, 0.0];
        let l2 = [true, false, true, false];
        assert_eq!(auc(&scores, &l2, Orientation::HigherIsOutlier).unwrap(), 1.0);
        assert_eq!(pair_count_auc(&scores, &l2), 1.0);
        assert_eq!(auc(&scores, &l2, Orientation::LowerIsOutlier).unwrap(), 0.0);
    }

    #[test]
    fn auc_errors() {
        assert!(matches!(
            auc(&[1.0, 2.0], &[true, true], Orientation::HigherIsOutlier),
            Err(Error::DegenerateLabels)
        ));
        assert!(matches!(
            auc(&[1.0], &[true, false], Orientation::HigherIsOutlier),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn auc_with_ties_matches_pair_counting() {
        let scores = [1.0, 1.0, 2.0, 0.0, 2.0, 1.0];
        let labels = [true, false, true, false, false, true];
        let a = auc(&scores, &labels, Orientation::HigherIsOutlier).unwrap();
        assert!((a - pair_count_auc(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn repeated_eval_statistics() {
        let ds = crate::data::synth_planted(30, 3, 2, 4.0, 1).unwrap();
        let stub = |d: &Dataset, _seed: u64| {
            Ok((
                d.labels.iter().map(|&l| f64::from(u8::from(l))).collect(),
                Orientation::HigherIsOutlier,
            ))
        };
        let one = repeated_eval_with("stub", &ds, 1, 0, stub).unwrap();
        assert_eq!((one.runs, one.auc_std, one.auc_mean), (1, 0.0, 1.0));
        let many = repeated_eval_with("stub", &ds, 7, 0, stub).unwrap();
        assert_eq!(many.auc_std, 0.0);
        assert!(repeated_eval_with("stub", &ds, 0, 0, stub).is_err());
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, std::f64::consts::SQRT_2));
    }

    #[test]
    fn ball_count_examples() {
        let pts = Points::from_rows(&[[0.0], [0.1], [0.2], [5.0]]).unwrap();
        let stats = FeatureStats::new(vec![0.0], vec![5.0]).unwrap();
        assert_eq!(ball_count(&pts, &[0.0], 0.04, &stats), 3);
        assert_eq!(ball_count(&pts, &[0.0], 0.0, &stats), 1);
        assert_eq!(ball_count(&pts, &[2.5], 0.0, &stats), 0);
        assert_eq!(ball_count(&pts, &[0.0], f64::MAX, &stats), 4);
    }

    #[test]
    fn bucket_oracle_basics() {
        let g = CompositeHash::new(vec![RfHashFunction { dim: 0, cut: 0.5 }]).unwrap();
        assert!(exact_bucket_oracle(&Points::new(1), &g).is_empty());
        let pts = Points::from_rows(&[[0.0], [1.0], [0.7]]).unwrap();
        let counts = exact_bucket_oracle(&pts, &g);
        assert_eq!(counts.get(&0), Some(&1));
        assert_eq!(counts.get(&1), Some(&2));
        assert_eq!(counts.values().sum::<usize>(), 3);
    }

    #[test]
    fn ledger_appends_with_single_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/results.csv");
        let r = EvalResult::from_runs("lsh-itables", "toy", vec![0.9, 0.8], 1.5, Epsilon::Finite(0.01), 2);
        r.append_to_ledger(&path).unwrap();
        r.append_to_ledger(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "detector,dataset,runs,auc_mean,auc_std,seconds,epsilon,participants"
        );
        assert!(lines[1].starts_with("lsh-itables,toy,2,0.850000,"));
        assert!(lines[1].ends_with(",0.01,2"));
    }
}
