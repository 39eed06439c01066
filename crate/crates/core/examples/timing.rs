//! Train/test wall-clock time of the three detectors as n grows.
//!
//! cargo run --release --example timing

use lsh_itables::cli::{bench_dataset, time_detector};
use lsh_itables::ensemble::{DetectorConfig, DetectorKind};

fn main() -> lsh_itables::Result<()> {
    for n in [10_000, 100_000, 300_000] {
        let dataset = bench_dataset(n, 10, 1)?;
        println!("n = {n}");
        for kind in DetectorKind::ALL {
            let row = time_detector(&DetectorConfig::new(kind), &dataset, 1)?;
            println!(
                "  {:<12} train {:>7.3}s  test {:>7.3}s",
                kind.to_string(),
                row.train_seconds,
                row.test_seconds
            );
        }
    }
    Ok(())
}
