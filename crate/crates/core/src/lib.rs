//! LSH iTables: an ensemble of random-feature LSH histograms for unsupervised
//! outlier detection.
//!
//! Each base model hashes a subsample into `2^l` buckets with `l` random
//! threshold functions and keeps the bucket counts. Because every participant
//! can hash with the same shared functions, the per-participant histograms
//! merge by elementwise sum, and each one can be released under ε-differential
//! privacy by adding Laplace noise to every cell before it leaves the device.
//!
//! The crate also carries the two baselines used for comparison (randomized
//! subspace hashing with a CountMin sketch, and isolation forest), an
//! in-process simulator for multi-participant collaboration, and an AUC
//! evaluation harness.
//!
//! ```
//! use lsh_itables::data::synth_planted;
//! use lsh_itables::ensemble::{DetectorConfig, DetectorKind};
//! use lsh_itables::evaluation::auc;
//!
//! let data = synth_planted(300, 10, 3, 5.0, 7).unwrap();
//! let config = DetectorConfig::new(DetectorKind::LshITables).with_models(50);
//! let model = config.fit(&data.points, 42).unwrap();
//! let scores = model.scores(&data.points);
//! let area = auc(&scores, &data.labels, model.orientation()).unwrap();
//! assert!(area > 0.9);
//! ```

pub mod cli;
pub mod collaborative;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod hashing;
pub mod histogram;
pub mod rng;

pub use error::{Error, Result};
