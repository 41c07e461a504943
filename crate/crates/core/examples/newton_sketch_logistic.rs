//! Distributed Newton sketch with line search on logistic regression.
//! Prints how many iterations each configuration needs to reach a relative
//! error of 1e-6.

use surrogate_newton::distributed::{run_distributed, DistributedConfig, SketchChoice, Solver};
use surrogate_newton::experiments::dataset::synthetic;
use surrogate_newton::loss::LossModel;

fn main() -> surrogate_newton::error::Result<()> {
    let ds = synthetic("logistic", 0)?;
    let labels = ds.y.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let loss = LossModel::logistic(ds.x, labels, 1e-4)?;
    for sketch in [SketchChoice::Surrogate, SketchChoice::Gaussian, SketchChoice::Uniform] {
        for scaled in [false, true] {
            let mut cfg = DistributedConfig::new(Solver::DistNewtonSketch, sketch, 50, 100, 15, 7);
            cfg.scaled = scaled;
            let run = run_distributed(&loss, &cfg)?;
            let iters = run.iterations_to(1e-6).map_or("not reached".into(), |t| t.to_string());
            println!("{:<10} scaled={scaled:<5} iterations to 1e-6: {iters}", sketch.name());
        }
    }
    Ok(())
}
