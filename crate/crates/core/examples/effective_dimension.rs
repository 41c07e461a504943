//! Effective dimension `d_λ` and the scaled local regularizer `λ′ = λ(1 − d_λ/m)`
//! over a few regularization strengths and sketch sizes.
//!
//! `cargo run --example effective_dimension`

use surrogate_newton::experiments::dataset::synthetic;
use surrogate_newton::problem::{effective_dimension, scaled_regularizer};

fn main() -> surrogate_newton::error::Result<()> {
    let ds = synthetic("boston_like", 0)?;
    println!("dataset {} ({} x {})", ds.name, ds.n(), ds.d());
    println!("{:>8} {:>5} {:>10} {:>10} {:>10}", "lambda", "m", "d_lambda", "gamma", "lambda'");
    for lambda in [1.0, 10.0, 100.0] {
        let d_lambda = effective_dimension(&ds.x, lambda)?;
        for m in [20, 50, 100] {
            match scaled_regularizer(lambda, d_lambda, m) {
                Ok(r) => println!("{lambda:>8} {m:>5} {d_lambda:>10.4} {:>10.4} {:>10.4}", r.gamma, r.lambda_prime),
                Err(e) => println!("{lambda:>8} {m:>5} {d_lambda:>10.4} infeasible: {e}"),
            }
        }
    }
    Ok(())
}
