//! Surrogate sketch draws and a small Monte Carlo check that the averaged
//! inverse `(AᵀS̄ᵀS̄A + λ′I)⁻¹` approaches `(m/γ)(AᵀA + λI)⁻¹`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use surrogate_newton::linalg;
use surrogate_newton::rng;
use surrogate_newton::surrogate::{surrogate_sketched_hessian, HessianVariant, SurrogateSketcher};

fn main() -> surrogate_newton::error::Result<()> {
    let (lambda, m, draws) = (1.0, 12, 20_000);
    let mut r = rng::stream(5, &[0]);
    let a = DMatrix::from_fn(40, 4, |i, _| (0.3 + i as f64 / 20.0) * r.sample::<f64, _>(StandardNormal));

    let sketcher = SurrogateSketcher::leverage(&a, lambda, m)?;
    let reg = sketcher.regularizer();
    println!("d_λ = {:.4}, γ = {:.4}, λ′ = {:.4}", reg.d_lambda, reg.gamma, reg.lambda_prime);

    let first = sketcher.draw(&mut r)?;
    println!(
        "one draw: {} DPP rows {:?}, {} i.i.d. rows",
        first.dpp_indices.len(),
        first.dpp_indices,
        first.iid_indices.len()
    );

    let target = linalg::spd_inverse(&linalg::add_diagonal(&linalg::gram(&a), lambda), "H")? * (m as f64 / reg.gamma);
    let mut sum = DMatrix::zeros(4, 4);
    let mut rows = 0usize;
    for _ in 0..draws {
        let sample = sketcher.draw(&mut r)?;
        rows += sample.row_count();
        let ht = surrogate_sketched_hessian(&sample, &a, lambda, HessianVariant::SketchAndSolve)?;
        sum += linalg::spd_inverse(&ht, "sketched H")?;
    }
    let mean = sum / draws as f64;
    println!("mean row count {:.3} (m = {m})", rows as f64 / draws as f64);
    println!(
        "relative error of the averaged inverse: {:.4}",
        (&mean - &target).norm() / target.norm()
    );
    Ok(())
}
