//! Draws each standard sketch family and compares the sketched Gram matrix
//! `AᵀSᵀSA` with `AᵀA` in relative spectral norm.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use surrogate_newton::linalg;
use surrogate_newton::rng;
use surrogate_newton::sketch::{draw_sketch, ridge_leverage_probabilities, SketchFamily, SketchSpec};

fn main() -> surrogate_newton::error::Result<()> {
    let (n, d, m) = (500, 8, 80);
    let mut r = rng::stream(1, &[0]);
    let a = DMatrix::from_fn(n, d, |i, _| (1.0 + (i % 5) as f64) * r.sample::<f64, _>(StandardNormal));
    let exact = linalg::gram(&a);
    let families = [
        SketchFamily::Gaussian,
        SketchFamily::Rademacher,
        SketchFamily::UniformRows,
        SketchFamily::ImportanceRows(ridge_leverage_probabilities(&a, 1.0)?),
    ];
    for family in families {
        let spec = SketchSpec::new(family, m, 7)?;
        let sample = draw_sketch(&spec, n, &mut spec.stream(0))?;
        let sketched = sample.sketched_gram(&a)?;
        let err = linalg::sym_spectral_norm(&(&sketched - &exact)) / linalg::sym_spectral_norm(&exact);
        println!("{:<11} rows={:<4} ‖AᵀSᵀSA − AᵀA‖/‖AᵀA‖ = {err:.3}", spec.family.name(), sample.row_count());
    }
    Ok(())
}
