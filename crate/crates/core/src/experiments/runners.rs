//! Experiment runners. Each returns a typed result that the acceptance tests
//! inspect directly and that converts into an [`ExperimentReport`].

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::distributed::{
    baseline, concentration_probe, run_distributed, sas_estimates, AveragingScheme, DistributedConfig,
    DistributedRun, LocalSketcher, RunStatus, SketchChoice, WorkerEstimate,
};
use crate::dpp::{subset_probability_oracle, RejectionConfig, RejectionDpp, SpectralDpp};
use crate::error::{Error, Result};
use crate::experiments::config::{Experiment, ExperimentConfig, LossChoice};
use crate::experiments::dataset::Dataset;
use crate::experiments::report::{Cell, CellKind, ExperimentReport};
use crate::leverage::{LeveragePrecompute, PrecomputeMode};
use crate::linalg;
use crate::loss::LossModel;
use crate::problem::{effective_dimension_of_gram, scaled_regularizer, solve_exact, Problem};
use crate::rng;

use CellKind::{Bool, Float, Int, Text, UInt};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the mean (sample standard deviation over `√len`).
pub fn stderr(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Relative errors `‖x̄_q − x*‖/‖x*‖` of the running averages of `estimates`
/// at every `q` in `q_grid` (uniform or determinant-weighted).
pub fn prefix_errors(
    estimates: &[WorkerEstimate],
    x_star: &DVector<f64>,
    q_grid: &[usize],
    scheme: AveragingScheme,
) -> Vec<f64> {
    let norm = x_star.norm().max(f64::MIN_POSITIVE);
    q_grid
        .iter()
        .map(|&q| {
            let slice = &estimates[..q];
            let avg = match scheme {
                AveragingScheme::Uniform => {
                    slice.iter().fold(DVector::zeros(x_star.len()), |acc, e| acc + &e.delta) / q as f64
                }
                AveragingScheme::Determinantal => {
                    let logdets: Vec<f64> = slice.iter().map(|e| e.sketched_hessian_logdet).collect();
                    let w = baseline::determinantal_weights(&logdets);
                    slice
                        .iter()
                        .zip(w)
                        .fold(DVector::zeros(x_star.len()), |acc, (e, w)| acc + &e.delta * w)
                }
            };
            (avg - x_star).norm() / norm
        })
        .collect()
}

/// Per-trial errors for one curve, `errors[trial][qi]`.
#[derive(Debug, Clone)]
pub struct ErrorCurve {
    pub label: String,
    pub sketch: SketchChoice,
    pub scaled: bool,
    pub lambda_local: f64,
    pub m: usize,
    pub q_grid: Vec<usize>,
    pub errors: Vec<Vec<f64>>,
}

impl ErrorCurve {
    pub fn at(&self, qi: usize) -> Vec<f64> {
        self.errors.iter().map(|e| e[qi]).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.q_grid.len()).map(|i| mean(&self.at(i))).collect()
    }

    pub fn medians(&self) -> Vec<f64> {
        (0..self.q_grid.len()).map(|i| median(&self.at(i))).collect()
    }

    pub fn stderrs(&self) -> Vec<f64> {
        (0..self.q_grid.len()).map(|i| stderr(&self.at(i))).collect()
    }
}

struct RidgeSetup {
    a: DMatrix<f64>,
    b: DVector<f64>,
    x_star: DVector<f64>,
}

fn ridge_setup(ds: &Dataset, lambda: f64) -> Result<RidgeSetup> {
    let problem = Problem::new(ds.x.clone(), ds.y.clone(), lambda)?;
    let x_star = solve_exact(&problem)?;
    Ok(RidgeSetup {
        a: ds.x.clone(),
        b: ds.y.clone(),
        x_star,
    })
}

/// Errors of the running averages of `max(q_grid)` sketch-and-solve
/// estimates, one row per trial. The sketches depend only on the trial seed,
/// so curves with different `lambda_local` share them.
#[allow(clippy::too_many_arguments)]
fn sas_curve(
    setup: &RidgeSetup,
    sketcher: &LocalSketcher,
    lambda: f64,
    lambda_local: f64,
    q_grid: &[usize],
    seeds: &[u64],
    scheme: AveragingScheme,
    label: String,
    scaled: bool,
) -> Result<ErrorCurve> {
    let q_max = *q_grid.iter().max().unwrap_or(&1);
    let errors = seeds
        .iter()
        .map(|&seed| {
            let est = sas_estimates(&setup.a, &setup.b, lambda, sketcher, lambda_local, q_max, seed, 0)?;
            Ok(prefix_errors(&est, &setup.x_star, q_grid, scheme))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorCurve {
        label,
        sketch: sketcher.choice(),
        scaled,
        lambda_local,
        m: sketcher.m(),
        q_grid: q_grid.to_vec(),
        errors,
    })
}

const CURVE_COLUMNS: [(&str, CellKind); 12] = [
    ("label", Text),
    ("sketch", Text),
    ("scaled", Bool),
    ("lambda", Float),
    ("lambda_local", Float),
    ("m", Int),
    ("q", Int),
    ("trials", Int),
    ("seed", UInt),
    ("mean_error", Float),
    ("stderr", Float),
    ("median_error", Float),
];

fn curves_report(cfg: &ExperimentConfig, curves: &[ErrorCurve]) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(cfg.experiment.name(), &CURVE_COLUMNS);
    cfg.echo_into(&mut report);
    for c in curves {
        let (means, errs, meds) = (c.means(), c.stderrs(), c.medians());
        for (i, &q) in c.q_grid.iter().enumerate() {
            report.push(vec![
                c.label.clone().into(),
                c.sketch.name().into(),
                c.scaled.into(),
                cfg.lambda.into(),
                c.lambda_local.into(),
                c.m.into(),
                q.into(),
                c.errors.len().into(),
                cfg.seed.into(),
                means[i].into(),
                errs[i].into(),
                meds[i].into(),
            ])?;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct CurveSet {
    pub curves: Vec<ErrorCurve>,
}

impl CurveSet {
    pub fn find(&self, label: &str) -> Option<&ErrorCurve> {
        self.curves.iter().find(|c| c.label == label)
    }
}

/// Bias of averaged sketch-and-solve estimates against `q`, for every
/// configured sketch with and without the scaled regularizer.
pub fn run_bias_sweep(cfg: &ExperimentConfig) -> Result<(CurveSet, ExperimentReport)> {
    let ds = cfg.load_dataset()?;
    let setup = ridge_setup(&ds, cfg.lambda)?;
    let seeds = cfg.trial_seeds();
    let mut curves = Vec::new();
    for &choice in &cfg.sketches {
        let sketcher = LocalSketcher::new(choice, &setup.a, cfg.lambda, cfg.m)?;
        for scaled in [false, true] {
            let lambda_local = sketcher.local_lambda(scaled)?;
            let label = format!("{}{}", choice.name(), if scaled { "+scaled" } else { "" });
            curves.push(sas_curve(
                &setup,
                &sketcher,
                cfg.lambda,
                lambda_local,
                &cfg.q_grid,
                &seeds,
                AveragingScheme::Uniform,
                label,
                scaled,
            )?);
        }
    }
    let report = curves_report(cfg, &curves)?;
    Ok((CurveSet { curves }, report))
}

/// Bias against `q` for a grid of local regularizers plus the scaled value;
/// the curve for the scaled value is labelled `<sketch>@theory`.
pub fn run_lambda_prime_sweep(cfg: &ExperimentConfig) -> Result<(CurveSet, ExperimentReport)> {
    let ds = cfg.load_dataset()?;
    let setup = ridge_setup(&ds, cfg.lambda)?;
    let seeds = cfg.trial_seeds();
    let mut curves = Vec::new();
    for &choice in &cfg.sketches {
        let sketcher = LocalSketcher::new(choice, &setup.a, cfg.lambda, cfg.m)?;
        let theory = sketcher.local_lambda(true)?;
        let mut grid: Vec<(f64, String, bool)> = cfg
            .lambda_prime_grid
            .iter()
            .map(|&lp| (lp, format!("{}@{lp}", choice.name()), lp != cfg.lambda))
            .collect();
        grid.push((theory, format!("{}@theory", choice.name()), true));
        for (lp, label, scaled) in grid {
            curves.push(sas_curve(
                &setup,
                &sketcher,
                cfg.lambda,
                lp,
                &cfg.q_grid,
                &seeds,
                AveragingScheme::Uniform,
                label,
                scaled,
            )?);
        }
    }
    let report = curves_report(cfg, &curves)?;
    Ok((CurveSet { curves }, report))
}

/// Surrogate sketch with the scaled regularizer against uniform row sampling
/// combined by unweighted or determinantal averaging, for every `m`.
pub fn run_averaging_comparison(cfg: &ExperimentConfig) -> Result<(CurveSet, ExperimentReport)> {
    let ds = cfg.load_dataset()?;
    let setup = ridge_setup(&ds, cfg.lambda)?;
    let seeds = cfg.trial_seeds();
    let mut curves = Vec::new();
    for &m in &cfg.m_grid {
        let surrogate = LocalSketcher::new(SketchChoice::Surrogate, &setup.a, cfg.lambda, m)?;
        let uniform = LocalSketcher::new(SketchChoice::Uniform, &setup.a, cfg.lambda, m)?;
        let runs = [
            (&surrogate, true, AveragingScheme::Uniform, "surrogate"),
            (&uniform, false, AveragingScheme::Uniform, "uniform"),
            (&uniform, false, AveragingScheme::Determinantal, "determinantal"),
        ];
        for (sketcher, scaled, scheme, name) in runs {
            let lambda_local = sketcher.local_lambda(scaled)?;
            curves.push(sas_curve(
                &setup,
                sketcher,
                cfg.lambda,
                lambda_local,
                &cfg.q_grid,
                &seeds,
                scheme,
                format!("{name}/m={m}"),
                scaled,
            )?);
        }
    }
    let report = curves_report(cfg, &curves)?;
    Ok((CurveSet { curves }, report))
}

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub sketch: SketchChoice,
    pub scaled: bool,
    pub trial: usize,
    pub seed: u64,
    pub run: DistributedRun,
}

#[derive(Debug, Clone)]
pub struct ConvergenceResult {
    pub runs: Vec<ConvergenceRun>,
}

impl ConvergenceResult {
    pub fn select(&self, sketch: SketchChoice, scaled: bool) -> Vec<&ConvergenceRun> {
        self.runs.iter().filter(|r| r.sketch == sketch && r.scaled == scaled).collect()
    }
}

/// Builds the loss named in the configuration on the dataset. Logistic labels
/// in `{−1, 1}` are mapped to `{0, 1}`; the barrier center is a seeded
/// Gaussian vector.
pub fn build_loss(cfg: &ExperimentConfig, ds: &Dataset) -> Result<LossModel> {
    match cfg.loss {
        LossChoice::Quadratic => LossModel::quadratic(ds.x.clone(), ds.y.clone(), cfg.lambda),
        LossChoice::Logistic => {
            let labels = ds.y.map(|v| if v == -1.0 { 0.0 } else { v });
            LossModel::logistic(ds.x.clone(), labels, cfg.lambda)
        }
        LossChoice::LogBarrier => {
            let mut r = rng::stream(cfg.data_seed, &[0xCE27]);
            let c = DVector::from_fn(ds.d(), |_, _| r.sample::<f64, _>(StandardNormal));
            LossModel::log_barrier(ds.x.clone(), cfg.barrier_t, c, cfg.lambda)
        }
    }
}

/// Distributed solver traces for every configured sketch, unscaled and
/// scaled, over the trial seeds.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<(ConvergenceResult, ExperimentReport)> {
    let ds = cfg.load_dataset()?;
    let loss = build_loss(cfg, &ds)?;
    let mut runs = Vec::new();
    for &sketch in &cfg.sketches {
        for scaled in [false, true] {
            for (trial, seed) in cfg.trial_seeds().into_iter().enumerate() {
                let mut dc = DistributedConfig::new(cfg.solver, sketch, cfg.m, cfg.q, cfg.t_max, seed);
                dc.scaled = scaled;
                dc.averaging = cfg.averaging;
                dc.fresh_sketches = cfg.fresh_sketches;
                let run = run_distributed(&loss, &dc)?;
                runs.push(ConvergenceRun {
                    sketch,
                    scaled,
                    trial,
                    seed,
                    run,
                });
            }
        }
    }
    let mut report = ExperimentReport::new(
        cfg.experiment.name(),
        &[
            ("sketch", Text),
            ("scaled", Bool),
            ("trial", Int),
            ("seed", UInt),
            ("t", Int),
            ("rel_error", Float),
            ("error_l2", Float),
            ("error_h", Float),
            ("objective", Float),
            ("step", Float),
            ("bound_lhs", Float),
            ("bound_rhs", Float),
            ("status", Text),
        ],
    );
    cfg.echo_into(&mut report);
    for r in &runs {
        let status = match r.run.status {
            RunStatus::Completed => "completed".to_string(),
            RunStatus::Diverged { at } => format!("diverged@{at}"),
        };
        for tr in &r.run.traces {
            report.push(vec![
                r.sketch.name().into(),
                r.scaled.into(),
                r.trial.into(),
                r.seed.into(),
                tr.t.into(),
                tr.rel_err.into(),
                tr.err_l2.into(),
                tr.err_h.into(),
                tr.f_val.into(),
                tr.step.unwrap_or(f64::NAN).into(),
                tr.bound.map_or(f64::NAN, |b| b.lhs).into(),
                tr.bound.map_or(f64::NAN, |b| b.rhs).into(),
                status.clone().into(),
            ])?;
        }
    }
    Ok((ConvergenceResult { runs }, report))
}

/// `d_λ`, `γ = m − d_λ` and `λ′` over the λ and m grids.
pub fn run_effective_dim(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ds = cfg.load_dataset()?;
    let g = linalg::gram(&ds.x);
    let mut report = ExperimentReport::new(
        Experiment::EffectiveDim.name(),
        &[
            ("dataset", Text),
            ("n", Int),
            ("d", Int),
            ("lambda", Float),
            ("m", Int),
            ("d_lambda", Float),
            ("gamma", Float),
            ("lambda_prime", Float),
            ("feasible", Bool),
        ],
    );
    cfg.echo_into(&mut report);
    for &lambda in &cfg.lambda_grid {
        let d_lambda = effective_dimension_of_gram(&g, lambda);
        for &m in &cfg.m_grid {
            let (lp, ok) = match scaled_regularizer(lambda, d_lambda, m) {
                Ok(r) => (r.lambda_prime, true),
                Err(Error::InfeasibleSketchSize { .. }) => (f64::NAN, false),
                Err(e) => return Err(e),
            };
            report.push(vec![
                ds.name.clone().into(),
                ds.n().into(),
                ds.d().into(),
                lambda.into(),
                m.into(),
                d_lambda.into(),
                (m as f64 - d_lambda).into(),
                lp.into(),
                ok.into(),
            ])?;
        }
    }
    Ok(report)
}

/// A small DPP test instance.
#[derive(Debug, Clone)]
pub struct DppInstance {
    pub name: String,
    pub a: DMatrix<f64>,
    pub lambda: f64,
}

/// Seeded instances with `n ≤ 8`, `d ≤ 3` and unequal row norms.
pub fn dpp_check_instances(seed: u64) -> Vec<DppInstance> {
    let shapes = [(4usize, 2usize, 1.0), (6, 2, 0.5), (5, 3, 2.0), (8, 2, 1.0)];
    shapes
        .iter()
        .enumerate()
        .map(|(k, &(n, d, lambda))| {
            let mut r = rng::stream(seed, &[0xD99, k as u64]);
            let a = DMatrix::from_fn(n, d, |i, _| {
                let scale = 0.4 + 1.2 * (i as f64) / (n as f64);
                scale * r.sample::<f64, _>(StandardNormal)
            });
            DppInstance {
                name: format!("n{n}d{d}"),
                a,
                lambda,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DppComparison {
    pub instance: String,
    pub sampler: &'static str,
    pub draws: usize,
    pub oracle: BTreeMap<Vec<usize>, f64>,
    pub counts: BTreeMap<Vec<usize>, usize>,
    pub total_variation: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square against `oracle`, merging cells (in increasing order of
/// expected count) until every merged cell expects at least five draws.
pub fn chi_square_test(
    oracle: &BTreeMap<Vec<usize>, f64>,
    counts: &BTreeMap<Vec<usize>, usize>,
    draws: usize,
) -> (f64, usize, f64) {
    let n = draws as f64;
    let mut cells: Vec<(f64, f64)> = oracle
        .iter()
        .map(|(s, p)| (p * n, *counts.get(s).unwrap_or(&0) as f64))
        .collect();
    // impossible subsets drawn at all would show up as infinite statistic
    let impossible: f64 = counts
        .iter()
        .filter(|(s, _)| oracle.get(*s).copied().unwrap_or(0.0) == 0.0)
        .map(|(_, c)| *c as f64)
        .sum();
    if impossible > 0.0 {
        return (f64::INFINITY, 0, 0.0);
    }
    cells.retain(|(e, _)| *e > 0.0);
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (e, o) in cells {
        acc.0 += e;
        acc.1 += o;
        if acc.0 >= 5.0 {
            merged.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => merged.push(acc),
        }
    }
    let stat: f64 = merged.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let dof = merged.len().saturating_sub(1);
    let p = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("positive degrees of freedom").cdf(stat)
    };
    (stat, dof, p)
}

const DPP_CHUNK: usize = 4096;

fn empirical_counts(
    draws: usize,
    seed: u64,
    sample: impl Fn(&mut rng::StreamRng) -> Result<Vec<usize>> + Sync,
) -> Result<BTreeMap<Vec<usize>, usize>> {
    let chunks = draws.div_ceil(DPP_CHUNK);
    let partial = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, &[c as u64]);
            let len = DPP_CHUNK.min(draws - c * DPP_CHUNK);
            let mut counts = BTreeMap::new();
            for _ in 0..len {
                *counts.entry(sample(&mut r)?).or_insert(0) += 1;
            }
            Ok(counts)
        })
        .collect::<Result<Vec<BTreeMap<Vec<usize>, usize>>>>()?;
    let mut total = BTreeMap::new();
    for part in partial {
        for (k, v) in part {
            *total.entry(k).or_insert(0) += v;
        }
    }
    Ok(total)
}

pub fn compare_dpp_sampler(
    inst: &DppInstance,
    sampler: &'static str,
    draws: usize,
    seed: u64,
) -> Result<DppComparison> {
    let oracle = subset_probability_oracle(&inst.a, inst.lambda)?;
    let counts = match sampler {
        "spectral" => {
            let s = SpectralDpp::new(&inst.a, inst.lambda)?;
            empirical_counts(draws, seed, |r| Ok(s.sample(r).indices))?
        }
        "rejection" => {
            let pre = LeveragePrecompute::for_ridge(&inst.a, inst.lambda, PrecomputeMode::Exact, seed)?;
            let cfg = RejectionConfig::default_for(&pre);
            let s = RejectionDpp::new(&inst.a, inst.lambda, pre, cfg)?;
            empirical_counts(draws, seed, |r| Ok(s.sample(r)?.indices))?
        }
        other => return Err(Error::Config(format!("unknown DPP sampler `{other}`"))),
    };
    let tv = 0.5
        * oracle
            .iter()
            .map(|(s, p)| (*counts.get(s).unwrap_or(&0) as f64 / draws as f64 - p).abs())
            .sum::<f64>()
        + 0.5
            * counts
                .iter()
                .filter(|(s, _)| !oracle.contains_key(*s))
                .map(|(_, c)| *c as f64 / draws as f64)
                .sum::<f64>();
    let (chi_square, dof, p_value) = chi_square_test(&oracle, &counts, draws);
    Ok(DppComparison {
        instance: inst.name.clone(),
        sampler,
        draws,
        oracle,
        counts,
        total_variation: tv,
        chi_square,
        dof,
        p_value,
    })
}

/// Both samplers on every built-in instance against the enumeration oracle.
pub fn run_dpp_check(cfg: &ExperimentConfig) -> Result<(Vec<DppComparison>, ExperimentReport)> {
    let mut results = Vec::new();
    for (k, inst) in dpp_check_instances(cfg.data_seed).iter().enumerate() {
        for (j, sampler) in ["spectral", "rejection"].into_iter().enumerate() {
            let seed = rng::derive_seed(cfg.seed, &[k as u64, j as u64]);
            results.push(compare_dpp_sampler(inst, sampler, cfg.draws, seed)?);
        }
    }
    let mut report = ExperimentReport::new(
        Experiment::DppCheck.name(),
        &[
            ("instance", Text),
            ("sampler", Text),
            ("draws", Int),
            ("seed", UInt),
            ("subset", Text),
            ("oracle_prob", Float),
            ("empirical_prob", Float),
            ("total_variation", Float),
            ("chi_square", Float),
            ("dof", Int),
            ("p_value", Float),
        ],
    );
    cfg.echo_into(&mut report);
    for r in &results {
        for (subset, p) in &r.oracle {
            let label = format!(
                "{{{}}}",
                subset.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
            );
            report.push(vec![
                r.instance.clone().into(),
                r.sampler.into(),
                r.draws.into(),
                cfg.seed.into(),
                Cell::Text(label),
                (*p).into(),
                (*r.counts.get(subset).unwrap_or(&0) as f64 / r.draws as f64).into(),
                r.total_variation.into(),
                r.chi_square.into(),
                r.dof.into(),
                r.p_value.into(),
            ])?;
        }
    }
    Ok((results, report))
}

#[derive(Debug, Clone)]
pub struct ConcentrationResult {
    pub q_grid: Vec<usize>,
    /// `errors[qi][trial]`
    pub errors: Vec<Vec<f64>>,
}

impl ConcentrationResult {
    pub fn medians(&self) -> Vec<f64> {
        self.errors.iter().map(|e| median(e)).collect()
    }
}

/// Spectral error of the averaged inverse sketched Hessian over the q grid.
pub fn run_concentration(cfg: &ExperimentConfig) -> Result<(ConcentrationResult, ExperimentReport)> {
    let ds = cfg.load_dataset()?;
    let choice = cfg.sketches.first().copied().unwrap_or(SketchChoice::Surrogate);
    let errors = cfg
        .q_grid
        .iter()
        .enumerate()
        .map(|(qi, &q)| {
            concentration_probe(
                &ds.x,
                cfg.lambda,
                choice,
                cfg.m,
                q,
                cfg.trials,
                rng::derive_seed(cfg.seed, &[qi as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let result = ConcentrationResult {
        q_grid: cfg.q_grid.clone(),
        errors,
    };
    let mut report = ExperimentReport::new(
        Experiment::Concentration.name(),
        &[
            ("sketch", Text),
            ("lambda", Float),
            ("m", Int),
            ("q", Int),
            ("trials", Int),
            ("seed", UInt),
            ("median_error", Float),
            ("mean_error", Float),
            ("stderr", Float),
        ],
    );
    cfg.echo_into(&mut report);
    for (qi, &q) in result.q_grid.iter().enumerate() {
        let e = &result.errors[qi];
        report.push(vec![
            choice.name().into(),
            cfg.lambda.into(),
            cfg.m.into(),
            q.into(),
            e.len().into(),
            cfg.seed.into(),
            median(e).into(),
            mean(e).into(),
            stderr(e).into(),
        ])?;
    }
    Ok((result, report))
}

/// Runs the configured experiment and returns its report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        Experiment::EffectiveDim => run_effective_dim(cfg),
        Experiment::BiasSweep => Ok(run_bias_sweep(cfg)?.1),
        Experiment::AveragingComparison => Ok(run_averaging_comparison(cfg)?.1),
        Experiment::Convergence => Ok(run_convergence(cfg)?.1),
        Experiment::LambdaPrimeSweep => Ok(run_lambda_prime_sweep(cfg)?.1),
        Experiment::DppCheck => Ok(run_dpp_check(cfg)?.1),
        Experiment::Concentration => Ok(run_concentration(cfg)?.1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((stderr(&[1.0, 2.0, 3.0]) - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn chi_square_merges_small_cells() {
        let oracle = BTreeMap::from([(vec![0], 0.5), (vec![1], 0.49), (vec![2], 0.01)]);
        let counts = BTreeMap::from([(vec![0], 50), (vec![1], 49), (vec![2], 1)]);
        let (stat, dof, p) = chi_square_test(&oracle, &counts, 100);
        assert_eq!(dof, 1);
        assert!(stat < 1e-12 && p > 0.99);
    }

    #[test]
    fn chi_square_flags_impossible_subsets() {
        let oracle = BTreeMap::from([(vec![0], 1.0), (vec![0, 1], 0.0)]);
        let counts = BTreeMap::from([(vec![0], 9), (vec![0, 1], 1)]);
        assert_eq!(chi_square_test(&oracle, &counts, 10).2, 0.0);
    }

    #[test]
    fn q_one_matches_single_estimate() {
        let mut cfg = ExperimentConfig::defaults(Experiment::BiasSweep);
        cfg.q_grid = vec![1];
        cfg.trials = 2;
        cfg.sketches = vec![SketchChoice::Uniform];
        let (set, _) = run_bias_sweep(&cfg).unwrap();
        let ds = cfg.load_dataset().unwrap();
        let setup = ridge_setup(&ds, cfg.lambda).unwrap();
        let sketcher = LocalSketcher::new(SketchChoice::Uniform, &setup.a, cfg.lambda, cfg.m).unwrap();
        let est = sas_estimates(&setup.a, &setup.b, cfg.lambda, &sketcher, cfg.lambda, 1, cfg.trial_seed(0), 0).unwrap();
        let single = (&est[0].delta - &setup.x_star).norm() / setup.x_star.norm();
        assert_eq!(set.find("uniform").unwrap().errors[0][0], single);
    }

    #[test]
    fn effective_dim_report_shape() {
        let cfg = ExperimentConfig::defaults(Experiment::EffectiveDim);
        let r = run_effective_dim(&cfg).unwrap();
        assert_eq!(r.rows.len(), cfg.lambda_grid.len() * cfg.m_grid.len());
    }
}
