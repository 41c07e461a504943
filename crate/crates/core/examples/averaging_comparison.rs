//! Surrogate sketch with `λ′` against plain and determinantal averaging of
//! uniform sketches, on a reduced version of the `avg-compare` experiment.

use surrogate_newton::experiments::runners::run_averaging_comparison;
use surrogate_newton::experiments::{Experiment, ExperimentConfig};

fn main() -> surrogate_newton::error::Result<()> {
    let mut cfg = ExperimentConfig::defaults(Experiment::AveragingComparison);
    cfg.m_grid = vec![20, 50];
    cfg.q_grid = vec![1, 4, 16, 64];
    cfg.trials = 20;
    let (curves, _) = run_averaging_comparison(&cfg)?;
    println!("mean estimation error by q = {:?}", cfg.q_grid);
    for c in &curves.curves {
        let means: Vec<String> = c.means().iter().map(|v| format!("{v:.4}")).collect();
        println!("{:<20} {}", c.label, means.join("  "));
    }
    Ok(())
}
