//! Preprocessing for the rejection DPP sampler: a spectral approximation `C`
//! of `AᵀA` and per-row over-estimates `l̃ᵢ` of the quadratic forms
//! `aᵢᵀ(C + I)⁻¹aᵢ`.
//!
//! To sample `DPP((1/λ)AAᵀ)` run the precompute on `A/√λ`; see
//! [`LeveragePrecompute::for_ridge`].

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::check_lambda;
use crate::rng;

/// How many times sketched mode doubles its sketch before giving up.
pub const MAX_DOUBLINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecomputeMode {
    Exact,
    /// Dense Rademacher sketch with `sketch_rows` rows for `C`, plus a
    /// Rademacher projection for the per-row quadratic forms.
    Sketched { sketch_rows: usize },
}

#[derive(Debug, Clone)]
pub struct LeveragePrecompute {
    pub c: DMatrix<f64>,
    pub l_tilde: Vec<f64>,
    /// `Σ l̃ᵢ`
    pub s: f64,
    /// `tr(C(C + I)⁻¹)`
    pub s_tilde: f64,
    /// Sketch size that produced `C`, after any doublings.
    pub sketch_rows: Option<usize>,
}

impl LeveragePrecompute {
    /// Precompute for the ridge kernel `(1/λ)AAᵀ`, i.e. on `A/√λ`.
    pub fn for_ridge(a: &DMatrix<f64>, lambda: f64, mode: PrecomputeMode, seed: u64) -> Result<Self> {
        check_lambda(lambda)?;
        precompute_leverage(&(a / lambda.sqrt()), mode, seed)
    }

    /// Exact quadratic forms `aᵢᵀ(C + I)⁻¹aᵢ` for every row of `a`.
    pub fn quadratic_forms(&self, a: &DMatrix<f64>) -> Result<Vec<f64>> {
        quadratic_forms(a, &self.c)
    }
}

fn quadratic_forms(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = linalg::cholesky(&linalg::add_diagonal(c, 1.0), "C + I")?;
    let x = chol.solve(&a.transpose());
    Ok((0..a.nrows())
        .map(|i| a.row(i).iter().zip(x.column(i).iter()).map(|(u, v)| u * v).sum::<f64>().max(0.0))
        .collect())
}

fn trace_ratio(c: &DMatrix<f64>) -> f64 {
    linalg::sym_eigenvalues(c)
        .into_iter()
        .map(|v| {
            let v = v.max(0.0);
            v / (1.0 + v)
        })
        .sum()
}

fn finish(c: DMatrix<f64>, l_tilde: Vec<f64>, sketch_rows: Option<usize>) -> LeveragePrecompute {
    let s = l_tilde.iter().sum();
    let s_tilde = trace_ratio(&c);
    LeveragePrecompute {
        c,
        l_tilde,
        s,
        s_tilde,
        sketch_rows,
    }
}

pub fn precompute_leverage(a: &DMatrix<f64>, mode: PrecomputeMode, seed: u64) -> Result<LeveragePrecompute> {
    linalg::check_finite_matrix(a, "data matrix")?;
    match mode {
        PrecomputeMode::Exact => {
            let c = linalg::gram(a);
            let l = quadratic_forms(a, &c)?;
            Ok(finish(c, l, None))
        }
        PrecomputeMode::Sketched { sketch_rows } => {
            let d = a.ncols();
            if sketch_rows < d {
                return Err(Error::invalid(format!(
                    "sketched precompute needs at least d = {d} sketch rows, got {sketch_rows}"
                )));
            }
            let mut rows = sketch_rows;
            for attempt in 0..=MAX_DOUBLINGS {
                let candidate = sketched_attempt(a, rows, seed, attempt as u64)?;
                if verify_sandwich(a, &candidate).is_ok() {
                    return Ok(candidate);
                }
                rows *= 2;
            }
            Err(Error::Numerical(format!(
                "sketched leverage precompute failed the spectral sandwich up to {} sketch rows",
                rows / 2
            )))
        }
    }
}

fn rademacher<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let v = 1.0 / (rows as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| if rng.random::<bool>() { v } else { -v })
}

fn sketched_attempt(a: &DMatrix<f64>, rows: usize, seed: u64, attempt: u64) -> Result<LeveragePrecompute> {
    let (n, d) = a.shape();
    let mut r = rng::stream(seed, &[0x1e7e, attempt]);
    let sa = rademacher(rows, n, &mut r) * a;
    let c = linalg::gram(&sa);

    // Project (C + I)^{-1/2}aᵢ down to k dimensions when that is cheaper than
    // the exact d-dimensional form.
    let k = ((32.0 * ((n + 1) as f64).ln()).ceil() as usize).max(8);
    let l_tilde = if k < d {
        let root_inv = linalg::sym_apply(&linalg::add_diagonal(&c, 1.0), |v| 1.0 / v.sqrt());
        let projector = rademacher(k, d, &mut r) * root_inv;
        let projected = a * projector.transpose();
        (0..n).map(|i| projected.row(i).norm_squared()).collect()
    } else {
        quadratic_forms(a, &c)?
    };
    Ok(finish(c, l_tilde, Some(rows)))
}

/// Checks `(1 − ε)AᵀA ⪯ C ⪯ (1 + ε)AᵀA` with `ε = 1/(4√d)` and the per-row
/// bounds `½·aᵢᵀ(C+I)⁻¹aᵢ ≤ l̃ᵢ ≤ (3/2)·aᵢᵀ(C+I)⁻¹aᵢ`.
pub fn verify_sandwich(a: &DMatrix<f64>, pre: &LeveragePrecompute) -> Result<()> {
    let d = a.ncols();
    let eps = 1.0 / (4.0 * (d as f64).sqrt());
    let g = linalg::gram(a);
    let slack = 1e-10 * (1.0 + g.norm());
    for (sign, factor) in [(1.0, 1.0 - eps), (-1.0, 1.0 + eps)] {
        // sign = +1: C − (1−ε)G ⪰ 0; sign = −1: (1+ε)G − C ⪰ 0
        let diff = (&pre.c - &g * factor) * sign;
        let min = linalg::sym_eigenvalues(&diff).first().copied().unwrap_or(0.0);
        if min < -slack {
            return Err(Error::InvariantViolation(format!(
                "spectral sandwich violated (min eigenvalue {min:e})"
            )));
        }
    }
    let exact = pre.quadratic_forms(a)?;
    for (i, (&lt, &l)) in pre.l_tilde.iter().zip(&exact).enumerate() {
        if lt < 0.5 * l - 1e-12 || lt > 1.5 * l + 1e-12 {
            return Err(Error::InvariantViolation(format!(
                "row {i}: estimate {lt} outside [{}, {}]",
                0.5 * l,
                1.5 * l
            )));
        }
    }
    Ok(())
}
