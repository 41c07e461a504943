//! Exact and sketched ridge-leverage precomputation. The sketched matrix `C`
//! satisfies `(1−ε)AᵀA ⪯ C ⪯ (1+ε)AᵀA` with `ε = 1/(4√d)`; `verify_sandwich`
//! checks it.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use surrogate_newton::leverage::{verify_sandwich, LeveragePrecompute, PrecomputeMode};
use surrogate_newton::rng;

fn main() -> surrogate_newton::error::Result<()> {
    let lambda: f64 = 2.0;
    let mut r = rng::stream(3, &[0]);
    let a = DMatrix::from_fn(400, 10, |i, _| (0.5 + (i % 9) as f64) * r.sample::<f64, _>(StandardNormal));
    let scaled = &a / lambda.sqrt();

    let exact = LeveragePrecompute::for_ridge(&a, lambda, PrecomputeMode::Exact, 0)?;
    let sketched = LeveragePrecompute::for_ridge(&a, lambda, PrecomputeMode::Sketched { sketch_rows: 64 }, 0)?;
    verify_sandwich(&scaled, &sketched)?;

    println!("exact:    s = {:.4}, s~ = {:.4}", exact.s, exact.s_tilde);
    println!(
        "sketched: s = {:.4}, s~ = {:.4}, rows used = {:?}",
        sketched.s, sketched.s_tilde, sketched.sketch_rows
    );
    let worst = exact
        .l_tilde
        .iter()
        .zip(&sketched.l_tilde)
        .map(|(e, s)| (s / e).max(e / s))
        .fold(1.0, f64::max);
    println!("largest per-row ratio between sketched and exact scores: {worst:.4}");
    Ok(())
}
