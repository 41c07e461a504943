//! Simulated distributed second-order solvers.
//!
//! `q` workers each receive an independent sketch of the local model
//! `(A_t, b_t)` and return a local step; the driver combines the steps by
//! uniform or determinantal averaging. Workers run on the rayon pool, each
//! with its own random stream keyed by `(iteration, worker)`, so results do not
//! depend on the number of threads.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::{backtracking_line_search, LineSearchParams, LocalModel, LossModel};
use crate::problem::{effective_dimension_of_gram, mahalanobis_norm, scaled_regularizer};
use crate::rng;
use crate::sketch::{draw_sketch, ridge_leverage_probabilities, RowSampler, SketchFamily, SketchSample, SketchSpec};
use crate::surrogate::SurrogateSketcher;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SketchChoice {
    /// `S = I`: every worker sees the full data.
    Exact,
    Gaussian,
    Rademacher,
    Uniform,
    /// i.i.d. sampling by ridge leverage scores.
    Leverage,
    /// Surrogate leverage-score sampling.
    Surrogate,
}

impl SketchChoice {
    pub const ALL: [SketchChoice; 6] = [
        SketchChoice::Exact,
        SketchChoice::Gaussian,
        SketchChoice::Rademacher,
        SketchChoice::Uniform,
        SketchChoice::Leverage,
        SketchChoice::Surrogate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SketchChoice::Exact => "exact",
            SketchChoice::Gaussian => "gaussian",
            SketchChoice::Rademacher => "rademacher",
            SketchChoice::Uniform => "uniform",
            SketchChoice::Leverage => "leverage",
            SketchChoice::Surrogate => "surrogate",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sketch family `{s}`")))
    }
}

#[derive(Debug, Clone)]
enum Source {
    Exact,
    Dense(SketchSpec),
    Rows(RowSampler),
    Surrogate(Box<SurrogateSketcher>),
}

/// Sketch source for one local model: caches `d_λ` and whatever the family
/// needs (probabilities, DPP eigendecomposition) so that workers only draw.
#[derive(Debug, Clone)]
pub struct LocalSketcher {
    choice: SketchChoice,
    m: usize,
    n: usize,
    ridge: f64,
    d_lambda: f64,
    source: Source,
}

impl LocalSketcher {
    pub fn new(choice: SketchChoice, a: &DMatrix<f64>, ridge: f64, m: usize) -> Result<Self> {
        let n = a.nrows();
        if m == 0 {
            return Err(Error::invalid("sketch size must be at least 1"));
        }
        let (source, d_lambda) = match choice {
            SketchChoice::Exact => (Source::Exact, effective_dimension_of_gram(&linalg::gram(a), ridge)),
            SketchChoice::Gaussian | SketchChoice::Rademacher | SketchChoice::Uniform => {
                let family = match choice {
                    SketchChoice::Gaussian => SketchFamily::Gaussian,
                    SketchChoice::Rademacher => SketchFamily::Rademacher,
                    _ => SketchFamily::UniformRows,
                };
                let d = effective_dimension_of_gram(&linalg::gram(a), ridge);
                if choice == SketchChoice::Uniform {
                    (Source::Rows(RowSampler::uniform(n)?), d)
                } else {
                    (Source::Dense(SketchSpec::new(family, m, 0)?), d)
                }
            }
            SketchChoice::Leverage => {
                let p = ridge_leverage_probabilities(a, ridge)?;
                let d = effective_dimension_of_gram(&linalg::gram(a), ridge);
                (Source::Rows(RowSampler::new(p)?), d)
            }
            SketchChoice::Surrogate => {
                let s = SurrogateSketcher::leverage(a, ridge, m)?;
                let d = s.regularizer().d_lambda;
                (Source::Surrogate(Box::new(s)), d)
            }
        };
        Ok(Self {
            choice,
            m,
            n,
            ridge,
            d_lambda,
            source,
        })
    }

    pub fn choice(&self) -> SketchChoice {
        self.choice
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d_lambda(&self) -> f64 {
        self.d_lambda
    }

    /// `λ(1 − d_λ/m)` when `scaled`, otherwise `λ`. The exact sketch is
    /// never rescaled.
    pub fn local_lambda(&self, scaled: bool) -> Result<f64> {
        if !scaled || self.choice == SketchChoice::Exact {
            return Ok(self.ridge);
        }
        Ok(scaled_regularizer(self.ridge, self.d_lambda, self.m)?.lambda_prime)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SketchSample> {
        match &self.source {
            Source::Exact => Ok(SketchSample::identity(self.n)),
            Source::Dense(spec) => draw_sketch(spec, self.n, rng),
            Source::Rows(sampler) => Ok(sampler.draw(self.m, rng)),
            Source::Surrogate(s) => Ok(s.draw(rng)?.sketch()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    SketchAndSolve,
    NewtonSketch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerEstimate {
    pub worker_id: usize,
    pub kind: EstimateKind,
    /// Local step `x̂ − x_t`.
    pub delta: DVector<f64>,
    /// `log det` of the sketched Hessian the worker inverted.
    pub sketched_hessian_logdet: f64,
    pub seed_used: u64,
    /// Inverse of the sketched Hessian, kept only when requested.
    pub hessian_inverse: Option<DMatrix<f64>>,
}

fn solve_local(h: &DMatrix<f64>, rhs: &DVector<f64>, keep_inverse: bool) -> Result<(DVector<f64>, f64, Option<DMatrix<f64>>)> {
    let chol = linalg::cholesky(h, "sketched Hessian")?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let delta = -chol.solve(rhs);
    linalg::check_finite_vector(&delta, "local step")?;
    let inverse = keep_inverse.then(|| linalg::symmetrize(chol.inverse()));
    Ok((delta, logdet, inverse))
}

/// Sketch-and-solve step `−H̃⁻¹g̃` with `H̃ = A_tᵀSᵀSA_t + λ′I` and
/// `g̃ = A_tᵀSᵀSb_t + λ′(x_t − c)`.
pub fn local_sas_estimate(model: &LocalModel, sketch: &SketchSample, lambda_local: f64) -> Result<WorkerEstimate> {
    if !(lambda_local >= 0.0) {
        return Err(Error::invalid(format!("local regularizer must be nonnegative, got {lambda_local}")));
    }
    let sa = sketch.apply_matrix(&model.a_t)?;
    let sb = sketch.apply_vector(&model.b_t)?;
    let h = linalg::add_diagonal(&linalg::gram(&sa), lambda_local);
    let g = sa.tr_mul(&sb) + &model.shift * lambda_local + &model.grad_extra;
    let (delta, logdet, _) = solve_local(&h, &g, false)?;
    Ok(WorkerEstimate {
        worker_id: 0,
        kind: EstimateKind::SketchAndSolve,
        delta,
        sketched_hessian_logdet: logdet,
        seed_used: 0,
        hessian_inverse: None,
    })
}

/// Newton-sketch step `−Ĥ⁻¹g(x_t)` with `Ĥ = (λ/λ′)A_tᵀSᵀSA_t + λI`.
pub fn local_newton_sketch_estimate(
    model: &LocalModel,
    sketch: &SketchSample,
    lambda_prime: f64,
) -> Result<WorkerEstimate> {
    newton_sketch_inner(model, &model.gradient(), sketch, lambda_prime, false)
}

fn newton_sketch_inner(
    model: &LocalModel,
    gradient: &DVector<f64>,
    sketch: &SketchSample,
    lambda_prime: f64,
    keep_inverse: bool,
) -> Result<WorkerEstimate> {
    if !(lambda_prime > 0.0) {
        return Err(Error::InfeasibleSketchSize {
            m: sketch.row_count(),
            d_lambda: f64::NAN,
        });
    }
    let lambda = model.ridge;
    let g = sketch.sketched_gram(&model.a_t)? * (lambda / lambda_prime);
    let h = linalg::add_diagonal(&g, lambda);
    let (delta, logdet, inverse) = solve_local(&h, gradient, keep_inverse)?;
    Ok(WorkerEstimate {
        worker_id: 0,
        kind: EstimateKind::NewtonSketch,
        delta,
        sketched_hessian_logdet: logdet,
        seed_used: 0,
        hessian_inverse: inverse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingScheme {
    Uniform,
    Determinantal,
}

impl AveragingScheme {
    pub fn name(self) -> &'static str {
        match self {
            AveragingScheme::Uniform => "uniform",
            AveragingScheme::Determinantal => "determinantal",
        }
    }
}

pub mod baseline {
    //! Determinant-weighted averaging of worker estimates.

    /// Normalized weights `det(H_k)/Σ_j det(H_j)` from log-determinants.
    pub fn determinantal_weights(logdets: &[f64]) -> Vec<f64> {
        let max = logdets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logdets.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

pub fn aggregate(estimates: &[WorkerEstimate], scheme: AveragingScheme) -> Result<DVector<f64>> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty list of estimates"))?;
    let d = first.delta.len();
    if let Some(bad) = estimates.iter().find(|e| e.delta.len() != d) {
        return Err(Error::DimensionMismatch {
            what: "worker estimate",
            expected: d,
            found: bad.delta.len(),
        });
    }
    let weights = match scheme {
        AveragingScheme::Uniform => vec![1.0 / estimates.len() as f64; estimates.len()],
        AveragingScheme::Determinantal => {
            let logdets: Vec<f64> = estimates.iter().map(|e| e.sketched_hessian_logdet).collect();
            baseline::determinantal_weights(&logdets)
        }
    };
    Ok(estimates
        .iter()
        .zip(weights)
        .fold(DVector::zeros(d), |acc, (e, w)| acc + &e.delta * w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Newton-sketch estimates with unit step.
    DistIhs,
    /// Newton-sketch estimates with backtracking line search on the average.
    DistNewtonSketch,
}

#[derive(Debug, Clone)]
pub struct DistributedConfig {
    pub solver: Solver,
    pub sketch: SketchChoice,
    pub m: usize,
    pub q: usize,
    pub t_max: usize,
    /// Use `λ′ = λ(1 − d_λ/m)` locally instead of `λ`.
    pub scaled: bool,
    pub averaging: AveragingScheme,
    /// Draw new sketches every iteration; when false each worker reuses the
    /// same random stream, which repeats its sketch while `A_t` is fixed.
    pub fresh_sketches: bool,
    pub line_search: LineSearchParams,
    pub seed: u64,
    pub x0: Option<DVector<f64>>,
}

impl DistributedConfig {
    pub fn new(solver: Solver, sketch: SketchChoice, m: usize, q: usize, t_max: usize, seed: u64) -> Self {
        Self {
            solver,
            sketch,
            m,
            q,
            t_max,
            scaled: true,
            averaging: AveragingScheme::Uniform,
            fresh_sketches: true,
            line_search: LineSearchParams::default(),
            seed,
            x0: None,
        }
    }
}

/// `‖x_{t+1} − x̂_{t+1}‖_H` against `‖H^{½}(H̄⁻¹ − H⁻¹)H^{½}‖·‖H⁻¹g‖_H`, where
/// `x̂_{t+1}` is the exact Newton iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MahalanobisCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl MahalanobisCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-9) + 1e-14
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub t: usize,
    pub x_t: DVector<f64>,
    pub err_l2: f64,
    /// `‖x_t − x*‖/‖x*‖`
    pub rel_err: f64,
    /// `‖x_t − x*‖_H` with `H = H(x*)`.
    pub err_h: f64,
    pub f_val: f64,
    pub wall_ns: u64,
    /// Step size applied to reach the next iterate.
    pub step: Option<f64>,
    pub bound: Option<MahalanobisCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// `err_H` grew tenfold over five iterations.
    Diverged { at: usize },
}

#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub traces: Vec<IterationTrace>,
    pub status: RunStatus,
    pub x_star: DVector<f64>,
}

impl DistributedRun {
    /// First iteration whose relative error is at most `tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.traces.iter().find(|t| t.rel_err <= tol).map(|t| t.t)
    }

    /// `err_H(t+1)/err_H(t)` for consecutive traces with nonzero error.
    pub fn contractions(&self) -> Vec<f64> {
        self.traces
            .windows(2)
            .filter(|w| w[0].err_h > 0.0)
            .map(|w| w[1].err_h / w[0].err_h)
            .collect()
    }
}

struct Reference {
    x_star: DVector<f64>,
    h_star: DMatrix<f64>,
}

impl Reference {
    fn new(loss: &LossModel) -> Result<Self> {
        let x_star = loss.minimize()?;
        let (_, _, h_star) = loss.objective_gradient_hessian(&x_star)?;
        Ok(Self { x_star, h_star })
    }

    fn trace(&self, loss: &LossModel, t: usize, x: &DVector<f64>, started: Instant) -> Result<IterationTrace> {
        let diff = x - &self.x_star;
        let norm_star = self.x_star.norm();
        let err_l2 = diff.norm();
        Ok(IterationTrace {
            t,
            x_t: x.clone(),
            err_l2,
            rel_err: if norm_star > 0.0 { err_l2 / norm_star } else { err_l2 },
            err_h: mahalanobis_norm(&diff, &self.h_star)?,
            f_val: loss.objective(x)?,
            wall_ns: started.elapsed().as_nanos() as u64,
            step: None,
            bound: None,
        })
    }
}

fn worker_stream(cfg: &DistributedConfig, t: usize, k: usize) -> (rng::StreamRng, u64) {
    let key: Vec<u64> = if cfg.fresh_sketches {
        vec![t as u64, k as u64]
    } else {
        vec![u64::MAX, k as u64]
    };
    (rng::stream(cfg.seed, &key), rng::stream_id(&key))
}

/// Runs the distributed solver from `x0` (default `0`, or the barrier center)
/// for `t_max` iterations, tracing the error against the exact minimizer.
pub fn run_distributed(loss: &LossModel, cfg: &DistributedConfig) -> Result<DistributedRun> {
    if cfg.q == 0 || cfg.t_max == 0 {
        return Err(Error::invalid("q and t_max must both be at least 1"));
    }
    let reference = Reference::new(loss)?;
    let started = Instant::now();
    let mut x = match (&cfg.x0, loss.kind()) {
        (Some(x0), _) => x0.clone(),
        (None, crate::loss::LossKind::LogBarrier { c, .. }) if loss.is_feasible(c) => c.clone(),
        _ => DVector::zeros(loss.d()),
    };
    let mut traces = vec![reference.trace(loss, 0, &x, started)?];
    let static_model = matches!(loss.kind(), crate::loss::LossKind::Quadratic { .. });
    let mut cached: Option<LocalSketcher> = None;
    let mut status = RunStatus::Completed;

    for t in 0..cfg.t_max {
        let model = loss.local_model(&x)?;
        let sketcher = match (&cached, static_model) {
            (Some(s), true) => s.clone(),
            _ => {
                let s = LocalSketcher::new(cfg.sketch, &model.a_t, model.ridge, cfg.m)?;
                if static_model {
                    cached = Some(s.clone());
                }
                s
            }
        };
        let lambda_prime = sketcher.local_lambda(cfg.scaled)?;
        let gradient = model.gradient();
        let want_inverse = cfg.averaging == AveragingScheme::Uniform;
        let estimates = (0..cfg.q)
            .into_par_iter()
            .map(|k| {
                let (mut r, seed_used) = worker_stream(cfg, t, k);
                let sketch = sketcher.draw(&mut r)?;
                let mut e = newton_sketch_inner(&model, &gradient, &sketch, lambda_prime, want_inverse)?;
                e.worker_id = k;
                e.seed_used = seed_used;
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        let direction = aggregate(&estimates, cfg.averaging)?;

        let bound = if want_inverse {
            Some(mahalanobis_check(&model, &gradient, &estimates, &direction)?)
        } else {
            None
        };
        let step = match cfg.solver {
            Solver::DistIhs => 1.0,
            Solver::DistNewtonSketch => backtracking_line_search(loss, &x, &direction, &cfg.line_search)?,
        };
        if let Some(last) = traces.last_mut() {
            last.step = Some(step);
            last.bound = bound;
        }
        x += direction * step;
        traces.push(reference.trace(loss, t + 1, &x, started)?);

        if t + 1 >= 5 {
            let now = traces[t + 1].err_h;
            let before = traces[t + 1 - 5].err_h;
            if !now.is_finite() || (before > 0.0 && now > 10.0 * before) {
                status = RunStatus::Diverged { at: t + 1 };
                break;
            }
        }
    }
    Ok(DistributedRun {
        traces,
        status,
        x_star: reference.x_star,
    })
}

fn mahalanobis_check(
    model: &LocalModel,
    gradient: &DVector<f64>,
    estimates: &[WorkerEstimate],
    direction: &DVector<f64>,
) -> Result<MahalanobisCheck> {
    let h = model.hessian();
    let h_inv = linalg::spd_inverse(&h, "local Hessian")?;
    let d = h.nrows();
    let mut h_bar_inv = DMatrix::zeros(d, d);
    for e in estimates {
        let inv = e
            .hessian_inverse
            .as_ref()
            .ok_or_else(|| Error::InvariantViolation("missing sketched Hessian inverse".into()))?;
        h_bar_inv += inv;
    }
    h_bar_inv /= estimates.len() as f64;
    let newton = -(&h_inv * gradient);
    let lhs = mahalanobis_norm(&(direction - &newton), &h)?;
    let root = linalg::sym_sqrt(&h);
    let middle = &root * (&h_bar_inv - &h_inv) * &root;
    let rhs = linalg::sym_spectral_norm(&linalg::symmetrize(middle)) * mahalanobis_norm(&newton, &h)?;
    Ok(MahalanobisCheck { lhs, rhs })
}

/// Spectral errors `‖H^{½}(H̄⁻¹ − H⁻¹)H^{½}‖` with `H̄⁻¹ = (1/q)Σ Ĥ_k⁻¹`, one
/// per trial, for `H = AᵀA + λI` and Newton-sketch Hessians built with the
/// scaled regularizer.
pub fn concentration_probe(
    a: &DMatrix<f64>,
    lambda: f64,
    choice: SketchChoice,
    m: usize,
    q: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::invalid("q must be at least 1"));
    }
    let sketcher = LocalSketcher::new(choice, a, lambda, m)?;
    let lambda_prime = sketcher.local_lambda(true)?;
    let h = linalg::add_diagonal(&linalg::gram(a), lambda);
    let h_inv = linalg::spd_inverse(&h, "AᵀA + λI")?;
    let root = linalg::sym_sqrt(&h);
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let d = a.ncols();
            let mut mean = DMatrix::zeros(d, d);
            for k in 0..q {
                let mut r = rng::stream(seed, &[trial as u64, k as u64]);
                let sketch = sketcher.draw(&mut r)?;
                let g = sketch.sketched_gram(a)? * (lambda / lambda_prime);
                mean += linalg::spd_inverse(&linalg::add_diagonal(&g, lambda), "sketched Hessian")?;
            }
            mean /= q as f64;
            let middle = linalg::symmetrize(&root * (mean - &h_inv) * &root);
            Ok(linalg::sym_spectral_norm(&middle))
        })
        .collect()
}

/// `count` independent sketch-and-solve estimates `x̂_k` of the ridge solution
/// (one-shot from `x_0 = 0`), drawn from streams `(trial, k)`.
pub fn sas_estimates(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    sketcher: &LocalSketcher,
    lambda_local: f64,
    count: usize,
    seed: u64,
    trial: u64,
) -> Result<Vec<WorkerEstimate>> {
    let model = LocalModel {
        a_t: a.clone(),
        b_t: -b.clone(),
        x_t: DVector::zeros(a.ncols()),
        shift: DVector::zeros(a.ncols()),
        ridge: lambda,
        grad_extra: DVector::zeros(a.ncols()),
    };
    (0..count)
        .into_par_iter()
        .map(|k| {
            let key = [trial, k as u64];
            let mut r = rng::stream(seed, &key);
            let sketch = sketcher.draw(&mut r)?;
            let mut e = local_sas_estimate(&model, &sketch, lambda_local)?;
            e.worker_id = k;
            e.seed_used = rng::stream_id(&key);
            Ok(e)
        })
        .collect()
}
