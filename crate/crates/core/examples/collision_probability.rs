//! Random-feature hashing: how often two points share a bit, measured
//! against the closed-form collision probability.
//!
//! cargo run --example collision_probability

use lsh_itables::data::Points;
use lsh_itables::hashing::{compute_feature_stats, rf_collision_prob, sample_rf_composite, weighted_l1};
use lsh_itables::rng::stream;

fn main() -> lsh_itables::Result<()> {
    let points = Points::from_rows(&[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])?;
    let stats = compute_feature_stats(&points)?;
    let x = [0.2, 0.5, 0.1];
    let mut rng = stream(1);
    let draws = 100_000;

    println!("{:<18} {:>10} {:>10} {:>10}", "q", "l1'(x,q)", "formula", "measured");
    for q in [[0.2, 0.5, 0.1], [0.3, 0.5, 0.2], [0.5, 0.9, 0.4], [1.0, 0.0, 1.0]] {
        let hits = (0..draws)
            .filter(|_| {
                let h = sample_rf_composite(&stats, 1, &mut rng).unwrap().functions()[0];
                h.hash(&x) == h.hash(&q)
            })
            .count();
        println!(
            "{:<18} {:>10.3} {:>10.4} {:>10.4}",
            format!("{q:?}"),
            weighted_l1(&x, &q, &stats),
            rf_collision_prob(&x, &q, &stats),
            hits as f64 / draws as f64
        );
    }

    // Concatenating l functions makes far pairs collide exponentially less.
    let q = [0.5, 0.9, 0.4];
    for l in [1, 2, 4, 8] {
        let hits = (0..draws)
            .filter(|_| {
                let g = sample_rf_composite(&stats, l, &mut rng).unwrap();
                g.code(&x) == g.code(&q)
            })
            .count();
        println!(
            "l = {l}: measured {:.4}, p^l = {:.4}",
            hits as f64 / draws as f64,
            rf_collision_prob(&x, &q, &stats).powi(l as i32)
        );
    }
    Ok(())
}
