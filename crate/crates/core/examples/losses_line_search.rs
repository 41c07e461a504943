//! Local quadratic models for the logistic and log-barrier losses, and a few
//! damped Newton steps using the backtracking line search.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use surrogate_newton::loss::{backtracking_line_search, LineSearchParams, LossModel};
use surrogate_newton::rng;

fn newton(name: &str, loss: &LossModel) -> surrogate_newton::error::Result<()> {
    let params = LineSearchParams::default();
    let mut x = DVector::zeros(loss.d());
    println!("{name}: f(x0) = {:.10}", loss.objective(&x)?);
    for t in 0..6 {
        let local = loss.local_model(&x)?;
        let dir = local.newton_step()?;
        let alpha = backtracking_line_search(loss, &x, &dir, &params)?;
        x += dir * alpha;
        println!("  t={t} step={alpha:<9} f={:.10}", loss.objective(&x)?);
    }
    let x_star = loss.minimize()?;
    println!("  distance to minimizer {:.3e}", (&x - x_star).norm());
    Ok(())
}

fn main() -> surrogate_newton::error::Result<()> {
    let mut r = rng::stream(8, &[0]);
    let a = DMatrix::from_fn(200, 5, |_, _| r.sample::<f64, _>(StandardNormal));
    let w = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 1.5]);
    let labels = (&a * &w).map(|z| if z + 0.5 * r.sample::<f64, _>(StandardNormal) > 0.0 { 1.0 } else { 0.0 });

    newton("logistic", &LossModel::logistic(a.clone(), labels, 1e-3)?)?;
    let center = DVector::from_element(5, 1.0);
    newton("log-barrier", &LossModel::log_barrier(a, 1.5, center, 20.0)?)?;
    Ok(())
}
