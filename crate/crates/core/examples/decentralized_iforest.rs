//! Why mergeability matters: when one participant holds mostly outliers,
//! an isolation forest trained on that shard alone loses the contrast it
//! needs, while the merged LSH iTables still sees the global density.
//!
//! cargo run --release --example decentralized_iforest [-- path/to/data.csv]

use lsh_itables::collaborative::{partition, run_collaboration, CollabConfig, PartitionSpec};
use lsh_itables::data::{load_csv, LoadOptions, Points};
use lsh_itables::ensemble::{iforest_local_only_train, Orientation};
use lsh_itables::evaluation::auc;
use lsh_itables::histogram::Epsilon;

fn main() -> lsh_itables::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/breastw.csv").to_string());
    let dataset = load_csv(path, LoadOptions::default())?;
    println!(
        "{:>10} {:>12} {:>16} {:>18}",
        "inliers", "shard size", "local iforest", "merged itables"
    );
    for inliers in [10, 25, 50, 100, 200] {
        let spec = PartitionSpec::outlier_skewed(2, 1.0, Some(inliers), 4);
        let shards = partition(&dataset, &spec)?;
        let points: Vec<Points> = shards.iter().map(|rows| dataset.points.select(rows)).collect();
        let shard0 = dataset.subset("shard0", &shards[0]);

        let local = iforest_local_only_train(&points, 100, 4)?;
        let forest = auc(
            &local[0].scores(&shard0.points)?,
            &shard0.labels,
            Orientation::HigherIsOutlier,
        )?;
        let merged = run_collaboration(&dataset, &CollabConfig::new(spec, 100, Epsilon::Infinite, 4))?;
        let merged = merged.participants[0].auc.unwrap_or(f64::NAN);
        println!(
            "{inliers:>10} {:>12} {:>16.2} {:>18.2}",
            shard0.len(),
            100.0 * forest,
            100.0 * merged
        );
    }
    Ok(())
}
