//! Detection quality against the privacy budget, for both mergeable
//! detectors, with two participants.
//!
//! cargo run --release --example epsilon_sweep [-- path/to/data.csv]

use lsh_itables::collaborative::{run_collaboration, run_collaboration_rsh, CollabConfig, PartitionSpec};
use lsh_itables::data::{load_csv, LoadOptions};
use lsh_itables::evaluation::mean_std;
use lsh_itables::histogram::Epsilon;
use lsh_itables::rng::derive_seed;

fn main() -> lsh_itables::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/breastw.csv").to_string());
    let dataset = load_csv(path, LoadOptions::default())?;
    let sweep = ["0.001", "0.002", "0.005", "0.01", "0.1", "inf"];
    println!("{:>8} {:>14} {:>14}", "ε", "lsh-itables", "rs-h");
    for eps in sweep {
        let epsilon: Epsilon = eps.parse()?;
        let (mut itables, mut rsh) = (Vec::new(), Vec::new());
        for r in 0..5 {
            let seed = derive_seed(17, r);
            let config = CollabConfig::new(PartitionSpec::uniform(2, seed), 100, epsilon, seed);
            itables.push(run_collaboration(&dataset, &config)?.mean_auc);
            rsh.push(run_collaboration_rsh(&dataset, &config)?.mean_auc);
        }
        let (a, sa) = mean_std(&itables);
        let (b, sb) = mean_std(&rsh);
        println!(
            "{eps:>8} {:>8.2} ± {:<4.1} {:>8.2} ± {:<4.1}",
            100.0 * a,
            100.0 * sa,
            100.0 * b,
            100.0 * sb
        );
    }
    Ok(())
}
