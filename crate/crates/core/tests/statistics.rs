//! Monte Carlo checks of the unbiasedness identities, with negative controls,
//! and consistency between experiment runners.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use surrogate_newton::distributed::{local_newton_sketch_estimate, sas_estimates, LocalSketcher, SketchChoice};
use surrogate_newton::experiments::runners::{run_bias_sweep, run_lambda_prime_sweep};
use surrogate_newton::experiments::{run_experiment, Experiment, ExperimentConfig};
use surrogate_newton::linalg;
use surrogate_newton::loss::LossModel;
use surrogate_newton::rng;

const DRAWS: usize = 100_000;
/// Negative controls need more draws: the unscaled surrogate bias is small
/// next to the spread of single estimates.
const CONTROL_DRAWS: usize = 400_000;
/// Entrywise agreement, in Monte Carlo standard errors.
const Z_PASS: f64 = 4.5;
/// A bias counts as detected beyond this many standard errors.
const Z_DETECT: f64 = 10.0;

fn instance() -> (DMatrix<f64>, DVector<f64>) {
    let mut r = rng::stream(314, &[0]);
    let a = DMatrix::from_fn(40, 3, |i, _| (0.3 + i as f64 / 15.0) * r.sample::<f64, _>(StandardNormal));
    let b = DVector::from_fn(40, |_, _| r.sample::<f64, _>(StandardNormal));
    (a, b)
}

/// Largest entrywise |mean − target| / SE over the samples.
fn max_z(samples: &[DVector<f64>], target: &DVector<f64>) -> f64 {
    let n = samples.len() as f64;
    (0..target.len())
        .map(|i| {
            let mean = samples.iter().map(|s| s[i]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean - target[i]).abs() / (var / n).sqrt()
        })
        .fold(0.0, f64::max)
}

fn ridge_solution(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> DVector<f64> {
    linalg::spd_solve(&linalg::add_diagonal(&linalg::gram(a), lambda), &a.tr_mul(b), "ridge").unwrap()
}

fn sas_z(choice: SketchChoice, scaled: bool, draws: usize) -> f64 {
    let (a, b) = instance();
    let lambda = 20.0;
    let sketcher = LocalSketcher::new(choice, &a, lambda, 5).unwrap();
    let lambda_local = sketcher.local_lambda(scaled).unwrap();
    let est = sas_estimates(&a, &b, lambda, &sketcher, lambda_local, draws, 9, 0).unwrap();
    let deltas: Vec<DVector<f64>> = est.into_iter().map(|e| e.delta).collect();
    max_z(&deltas, &ridge_solution(&a, &b, lambda))
}

#[test]
fn surrogate_sketch_and_solve_is_unbiased_with_scaled_regularizer() {
    let z = sas_z(SketchChoice::Surrogate, true, DRAWS);
    assert!(z <= Z_PASS, "max |z| = {z}");
}

#[test]
fn unscaled_surrogate_is_detectably_biased() {
    let z = sas_z(SketchChoice::Surrogate, false, CONTROL_DRAWS);
    assert!(z >= Z_DETECT, "max |z| = {z}");
}

#[test]
fn uniform_sampling_is_detectably_biased() {
    let z = sas_z(SketchChoice::Uniform, false, CONTROL_DRAWS);
    assert!(z >= Z_DETECT, "max |z| = {z}");
}

#[test]
fn newton_sketch_inverse_and_step_are_unbiased() {
    let (a, b) = instance();
    let labels = b.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let lambda = 0.05;
    let loss = LossModel::logistic(a.clone(), labels, lambda).unwrap();
    let x = DVector::from_vec(vec![0.2, -0.1, 0.3]);
    let model = loss.local_model(&x).unwrap();
    let sketcher = LocalSketcher::new(SketchChoice::Surrogate, &model.a_t, lambda, 10).unwrap();
    let lambda_prime = sketcher.local_lambda(true).unwrap();

    let h_inv = linalg::spd_inverse(&model.hessian(), "H").unwrap();
    let newton = model.newton_step().unwrap();
    let mut steps = Vec::with_capacity(DRAWS / 4);
    let mut inverses = Vec::with_capacity(DRAWS / 4);
    for k in 0..DRAWS / 4 {
        let mut r = rng::stream(21, &[k as u64]);
        let sketch = sketcher.draw(&mut r).unwrap();
        steps.push(local_newton_sketch_estimate(&model, &sketch, lambda_prime).unwrap().delta);
        let g = sketch.sketched_gram(&model.a_t).unwrap() * (lambda / lambda_prime);
        let inv = linalg::spd_inverse(&linalg::add_diagonal(&g, lambda), "Ĥ").unwrap();
        inverses.push(DVector::from_column_slice(inv.as_slice()));
    }
    let z_step = max_z(&steps, &newton);
    let z_inv = max_z(&inverses, &DVector::from_column_slice(h_inv.as_slice()));
    assert!(z_step <= Z_PASS, "step max |z| = {z_step}");
    assert!(z_inv <= Z_PASS, "inverse max |z| = {z_inv}");
}

#[test]
fn lambda_prime_sweep_at_lambda_matches_unscaled_bias_sweep() {
    let mut bias = ExperimentConfig::defaults(Experiment::BiasSweep);
    bias.sketches = vec![SketchChoice::Surrogate];
    bias.q_grid = vec![1, 2, 4, 8];
    bias.trials = 3;
    let mut lp = ExperimentConfig::defaults(Experiment::LambdaPrimeSweep);
    lp.sketches = bias.sketches.clone();
    lp.lambda = bias.lambda;
    lp.m = bias.m;
    lp.q_grid = bias.q_grid.clone();
    lp.trials = bias.trials;
    lp.seed = bias.seed;
    lp.lambda_prime_grid = vec![bias.lambda / 2.0, bias.lambda];

    let (b, _) = run_bias_sweep(&bias).unwrap();
    let (l, _) = run_lambda_prime_sweep(&lp).unwrap();
    let unscaled = b.find("surrogate").unwrap();
    let at_lambda = l.find(&format!("surrogate@{}", bias.lambda)).unwrap();
    assert_eq!(unscaled.errors, at_lambda.errors);
    assert!(!at_lambda.scaled);
}

#[test]
fn reports_are_reproducible_and_seed_sensitive() {
    let mut cfg = ExperimentConfig::defaults(Experiment::BiasSweep);
    cfg.q_grid = vec![1, 4];
    cfg.trials = 2;
    let first = run_experiment(&cfg).unwrap().to_csv_string().unwrap();
    let second = run_experiment(&cfg).unwrap().to_csv_string().unwrap();
    assert_eq!(first, second);
    cfg.seed += 1;
    assert_ne!(first, run_experiment(&cfg).unwrap().to_csv_string().unwrap());
}
