#![allow(dead_code)]

use fairkit_core::rng::stream;
use fairkit_core::OutcomeRecord;
use rand::Rng;

/// Scored records with group-independent class-conditional score densities:
/// positives `2x`, negatives `2(1 - x)` on `[0, 1]`.
pub fn synthetic(groups: &[(&str, usize, f64)], seed: u64) -> Vec<OutcomeRecord> {
    let mut out = Vec::new();
    for (gi, &(name, n, prevalence)) in groups.iter().enumerate() {
        let mut rng = stream(seed, gi as u64);
        for _ in 0..n {
            let y = rng.random::<f64>() < prevalence;
            let u: f64 = rng.random();
            let score = if y { u.sqrt() } else { 1.0 - u.sqrt() };
            out.push(OutcomeRecord::scored(name, y, score).unwrap());
        }
    }
    out
}

/// Small dataset with coarse (heavily tied) scores.
pub fn small_tied(n: usize, levels: u32, seed: u64) -> Vec<OutcomeRecord> {
    let mut rng = stream(seed, 0);
    let mut out: Vec<OutcomeRecord> = (0..n)
        .map(|_| {
            let y = rng.random::<f64>() < 0.4;
            let level = rng.random_range(0..=levels);
            OutcomeRecord::scored("g", y, level as f64 / levels as f64).unwrap()
        })
        .collect();
    // Guarantee both classes.
    out[0].y = true;
    out[1].y = false;
    out
}
