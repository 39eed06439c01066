//! Several participants build one global LSH iTables without sharing raw
//! data: a coordinator publishes the hash functions, each participant
//! releases noisy histograms, everyone merges and scores locally.
//!
//! cargo run --release --example collaboration

use lsh_itables::collaborative::{run_collaboration, CollabConfig, Message, PartitionSpec};
use lsh_itables::data::{load_csv, LoadOptions};
use lsh_itables::histogram::Epsilon;

fn main() -> lsh_itables::Result<()> {
    let dataset = load_csv(
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/breastw.csv"),
        LoadOptions::default(),
    )?;
    let config = CollabConfig::new(PartitionSpec::uniform(4, 8), 100, Epsilon::new(0.05)?, 21);
    let report = run_collaboration(&dataset, &config)?;

    for p in &report.participants {
        match p.auc {
            Some(a) => println!(
                "participant {}: {} points ({} outliers), AUC {:.2}",
                p.id,
                p.shard_size,
                p.outliers,
                100.0 * a
            ),
            None => println!("participant {}: {} points, no AUC", p.id, p.shard_size),
        }
    }
    println!("mean AUC {:.2}", 100.0 * report.mean_auc);
    println!(
        "privacy: per participant {:?}, total {}; sequential bound over {} releases each: {}",
        report
            .account
            .per_participant
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>(),
        report.account.total,
        report.account.releases_per_participant,
        report.account.sequential_total()
    );

    // Every participant assembled the same global model.
    let first = report.participants[0].merged.as_ref().unwrap();
    assert!(report.participants.iter().all(|p| p.merged.as_ref() == Some(first)));

    let messages = report.transcript.messages()?;
    let releases = messages.iter().filter(|m| matches!(m, Message::Histogram(_))).count();
    let bytes: usize = report.transcript.lines().iter().map(String::len).sum();
    println!(
        "transcript: {} messages ({releases} histogram releases), {bytes} bytes",
        messages.len()
    );
    Ok(())
}
