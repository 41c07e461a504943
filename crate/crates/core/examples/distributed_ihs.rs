//! Distributed iterative Hessian sketch on a least-squares problem, comparing
//! the scaled regularizer `λ′` with the unscaled `λ` for surrogate sketches.

use surrogate_newton::distributed::{run_distributed, DistributedConfig, SketchChoice, Solver};
use surrogate_newton::experiments::dataset::synthetic;
use surrogate_newton::loss::LossModel;

fn main() -> surrogate_newton::error::Result<()> {
    let ds = synthetic("quadratic", 0)?;
    let loss = LossModel::quadratic(ds.x, ds.y, 1.0)?;
    for scaled in [false, true] {
        let mut cfg = DistributedConfig::new(Solver::DistIhs, SketchChoice::Surrogate, 80, 10, 8, 42);
        cfg.scaled = scaled;
        let run = run_distributed(&loss, &cfg)?;
        let errs: Vec<String> = run.traces.iter().map(|t| format!("{:.1e}", t.rel_err)).collect();
        println!("scaled={scaled:<5} relative error by iteration: {}", errs.join(" "));
    }
    Ok(())
}
