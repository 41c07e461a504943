//! Spectral and rejection DPP samplers against exact subset probabilities.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use surrogate_newton::dpp::{subset_probability_oracle, RejectionConfig, RejectionDpp, SpectralDpp};
use surrogate_newton::leverage::{LeveragePrecompute, PrecomputeMode};
use surrogate_newton::rng;

const DRAWS: usize = 20_000;

fn main() -> surrogate_newton::error::Result<()> {
    let a = DMatrix::from_row_slice(5, 2, &[1.0, 0.2, -0.5, 1.1, 0.3, 0.3, 1.4, -0.7, 0.1, 0.9]);
    let lambda = 1.0;
    let oracle = subset_probability_oracle(&a, lambda)?;

    let spectral = SpectralDpp::new(&a, lambda)?;
    let pre = LeveragePrecompute::for_ridge(&a, lambda, PrecomputeMode::Exact, 0)?;
    let rejection = RejectionDpp::new(&a, lambda, pre.clone(), RejectionConfig::default_for(&pre))?;

    let mut spectral_counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut rejection_counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut r = rng::stream(11, &[0]);
    for _ in 0..DRAWS {
        *spectral_counts.entry(spectral.sample(&mut r).indices).or_default() += 1;
        *rejection_counts.entry(rejection.sample(&mut r)?.indices).or_default() += 1;
    }

    println!("expected size {:.4}", spectral.expected_size());
    println!("{:<10} {:>9} {:>9} {:>9}", "subset", "oracle", "spectral", "rejection");
    for (subset, p) in oracle.iter().filter(|(_, p)| **p > 0.0) {
        let freq = |c: &BTreeMap<Vec<usize>, usize>| c.get(subset).copied().unwrap_or(0) as f64 / DRAWS as f64;
        println!(
            "{:<10} {p:>9.4} {:>9.4} {:>9.4}",
            format!("{subset:?}"),
            freq(&spectral_counts),
            freq(&rejection_counts)
        );
    }
    Ok(())
}
