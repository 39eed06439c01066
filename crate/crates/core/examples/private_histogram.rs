//! One base model's histogram: count, release under ε-DP, ship as JSON,
//! and merge with another participant's release.
//!
//! cargo run --example private_histogram

use lsh_itables::data::synth_planted;
use lsh_itables::ensemble::{score_from_count, train_base};
use lsh_itables::evaluation::exact_bucket_oracle;
use lsh_itables::hashing::{compute_feature_stats, sample_rf_composite};
use lsh_itables::histogram::{Epsilon, Histogram, HistogramMessage};
use lsh_itables::rng::stream;

fn main() -> lsh_itables::Result<()> {
    let data = synth_planted(400, 8, 3, 4.0, 7)?;
    let stats = compute_feature_stats(&data.points)?;
    let g = sample_rf_composite(&stats, 4, &mut stream(1))?;

    let exact = train_base(&data.points, &g, data.len(), Epsilon::Infinite, &mut stream(2))?;
    println!("exact counts {:?}", exact.counts());
    assert_eq!(
        exact_bucket_oracle(&data.points, &g).values().sum::<usize>(),
        exact.total() as usize
    );

    let noisy = train_base(&data.points, &g, data.len(), Epsilon::new(0.5)?, &mut stream(2))?;
    let rounded: Vec<i64> = noisy.counts().iter().map(|c| c.round() as i64).collect();
    println!("ε = 0.5 release {rounded:?}");

    // What actually leaves a participant.
    let wire = serde_json::to_string(&HistogramMessage::new(&noisy, 0, 1)?)?;
    println!("message: {} bytes, {}…", wire.len(), &wire[..wire.len().min(80)]);
    let received: HistogramMessage = serde_json::from_str(&wire)?;
    let received = received.into_histogram()?;
    assert_eq!(received.counts(), noisy.counts());

    // Two participants holding the even and odd rows merge to the global counts.
    let (even, odd): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|i| i % 2 == 0);
    let a = data.points.select(&even);
    let b = data.points.select(&odd);
    let release_a = train_base(&a, &g, a.len(), Epsilon::new(0.5)?, &mut stream(3))?;
    let release_b = train_base(&b, &g, b.len(), Epsilon::new(0.5)?, &mut stream(4))?;
    let merged = Histogram::merge([&release_a, &release_b])?;
    println!(
        "merged from {} releases, budgets {:?}",
        merged.sources(),
        merged.epsilons()
    );

    let q = data.points.row(0);
    let cell = g.code(q);
    println!(
        "bucket of point 0: exact {}, merged {:.1}, score {:.2}",
        exact.counts()[cell],
        merged.counts()[cell],
        score_from_count(merged.counts()[cell])
    );
    Ok(())
}
