//! Sampling `S ∼ DPP((1/λ)AAᵀ)`, where `Pr(S) ∝ det((1/λ)A_S A_Sᵀ)`.
//!
//! [`SpectralDpp`] is the exact eigendecomposition sampler for L-ensembles and
//! the default. [`RejectionDpp`] is the intermediate-sampling rejection scheme:
//! it draws a Poisson number of rows from the (over-estimated) leverage
//! distribution, thins them, accepts the batch with probability
//! `e^{s̃}·det(I + ÃᵀÃ) / (e^{t/r}·det(I + C))` and then runs a small DPP on
//! the accepted rows. [`subset_probability_oracle`] enumerates all subsets for
//! tiny `n` and is used to test both.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Poisson;

use crate::error::{Error, Result};
use crate::leverage::LeveragePrecompute;
use crate::linalg;
use crate::problem::check_lambda;

/// Largest `n` the enumeration oracle accepts.
pub const ORACLE_MAX_N: usize = 20;

const RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DppMethod {
    Spectral,
    Rejection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DppDraw {
    /// Sorted, duplicate-free row indices.
    pub indices: Vec<usize>,
    pub method: DppMethod,
    /// Rounds used by the rejection sampler (0 for the spectral sampler).
    pub rejection_rounds: usize,
}

/// Draws from `Poisson(mean)`; inversion for small means, rejection for large
/// ones (both inside `rand_distr`).
pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::Numerical(format!("Poisson({mean}): {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Chain-rule sampler for the projection DPP spanned by the orthonormal
/// columns of `u`. Returns row positions. Rows sharing a label with an
/// already chosen row are excluded.
fn sample_projection<R: Rng + ?Sized>(u: &DMatrix<f64>, labels: Option<&[usize]>, rng: &mut R) -> Vec<usize> {
    let (n, k) = u.shape();
    let mut residual: Vec<f64> = (0..n).map(|i| u.row(i).norm_squared()).collect();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = residual.iter().map(|v| v.max(0.0)).sum();
        if total <= 1e-12 {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, r) in residual.iter().enumerate() {
            let r = r.max(0.0);
            if r == 0.0 {
                continue;
            }
            acc += r;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let Some(i) = pick else { break };
        let mut v: DVector<f64> = u.row(i).transpose();
        for e in &basis {
            let c = v.dot(e);
            v -= e * c;
        }
        let norm = v.norm();
        chosen.push(i);
        residual[i] = 0.0;
        if let Some(labels) = labels {
            for (j, r) in residual.iter_mut().enumerate() {
                if labels[j] == labels[i] {
                    *r = 0.0;
                }
            }
        }
        if norm <= 1e-12 {
            break;
        }
        let e = v / norm;
        let proj = u * &e;
        for (r, p) in residual.iter_mut().zip(proj.iter()) {
            *r -= p * p;
        }
        basis.push(e);
    }
    chosen
}

/// Eigendecomposition of the dual kernel `(1/λ)AᵀA`, reusable across draws.
#[derive(Debug, Clone)]
pub struct SpectralDpp {
    eigenvalues: Vec<f64>,
    /// `n × r` matrix whose columns are the unit eigenvectors of `(1/λ)AAᵀ`.
    basis: DMatrix<f64>,
}

impl SpectralDpp {
    pub fn new(a: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        linalg::check_finite_matrix(a, "data matrix")?;
        let dual = linalg::gram(a) / lambda;
        let (vals, vecs) = linalg::sym_eigen(&dual);
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigendecomposition produced non-finite values".into()));
        }
        let top = vals.last().copied().unwrap_or(0.0).max(1.0);
        let keep: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] > 1e-12 * top).collect();
        let mut basis = DMatrix::zeros(a.nrows(), keep.len());
        let mut eigenvalues = Vec::with_capacity(keep.len());
        for (c, &j) in keep.iter().enumerate() {
            let mu = vals[j];
            let col = a * vecs.column(j) / (lambda * mu).sqrt();
            basis.set_column(c, &col);
            eigenvalues.push(mu);
        }
        Ok(Self { eigenvalues, basis })
    }

    /// Nonzero eigenvalues of `(1/λ)AᵀA`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `E[|S|] = Σ μ/(1 + μ) = d_λ`.
    pub fn expected_size(&self) -> f64 {
        self.eigenvalues.iter().map(|mu| mu / (1.0 + mu)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DppDraw {
        let mut indices = self.sample_positions(None, rng);
        indices.sort_unstable();
        DppDraw {
            indices,
            method: DppMethod::Spectral,
            rejection_rounds: 0,
        }
    }

    fn sample_positions<R: Rng + ?Sized>(&self, labels: Option<&[usize]>, rng: &mut R) -> Vec<usize> {
        let selected: Vec<usize> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, mu)| rng.random::<f64>() < *mu / (1.0 + *mu))
            .map(|(j, _)| j)
            .collect();
        if selected.is_empty() {
            return Vec::new();
        }
        let u = self.basis.select_columns(selected.iter());
        sample_projection(&u, labels, rng)
    }
}

pub fn dpp_sample_spectral<R: Rng + ?Sized>(a: &DMatrix<f64>, lambda: f64, rng: &mut R) -> Result<DppDraw> {
    Ok(SpectralDpp::new(a, lambda)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionConfig {
    /// Oversampling parameter.
    pub r: f64,
    pub max_rounds: usize,
}

impl RejectionConfig {
    pub fn new(r: f64, max_rounds: usize) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("oversampling parameter r must be positive, got {r}")));
        }
        if max_rounds == 0 {
            return Err(Error::invalid("max_rounds must be at least 1"));
        }
        Ok(Self { r, max_rounds })
    }

    /// `r = max(1, s̃)`.
    pub fn default_for(pre: &LeveragePrecompute) -> Self {
        Self {
            r: pre.s_tilde.max(1.0),
            max_rounds: 10_000,
        }
    }
}

/// Rejection sampler state for `DPP((1/λ)AAᵀ)`.
#[derive(Debug, Clone)]
pub struct RejectionDpp {
    scaled: DMatrix<f64>,
    pre: LeveragePrecompute,
    cfg: RejectionConfig,
    c_plus_i: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    logdet_c_plus_i: f64,
    proposal: Option<WeightedIndex<f64>>,
}

impl RejectionDpp {
    /// `pre` must have been computed on `A/√λ`
    /// (see [`LeveragePrecompute::for_ridge`]).
    pub fn new(a: &DMatrix<f64>, lambda: f64, pre: LeveragePrecompute, cfg: RejectionConfig) -> Result<Self> {
        check_lambda(lambda)?;
        let cfg = RejectionConfig::new(cfg.r, cfg.max_rounds)?;
        let scaled = a / lambda.sqrt();
        if pre.l_tilde.len() != scaled.nrows() || pre.c.nrows() != scaled.ncols() {
            return Err(Error::DimensionMismatch {
                what: "leverage precompute",
                expected: scaled.nrows(),
                found: pre.l_tilde.len(),
            });
        }
        let c_plus_i = linalg::cholesky(&linalg::add_diagonal(&pre.c, 1.0), "C + I")?;
        let logdet_c_plus_i = {
            let l = c_plus_i.l_dirty();
            (0..pre.c.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum()
        };
        let proposal = if pre.s > 0.0 {
            Some(WeightedIndex::new(&pre.l_tilde).map_err(|e| Error::invalid(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            scaled,
            pre,
            cfg,
            c_plus_i,
            logdet_c_plus_i,
            proposal,
        })
    }

    pub fn config(&self) -> RejectionConfig {
        self.cfg
    }

    fn exact_form(&self, i: usize) -> f64 {
        let ai: DVector<f64> = self.scaled.row(i).transpose();
        ai.dot(&self.c_plus_i.solve(&ai)).max(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DppDraw> {
        let r = self.cfg.r;
        let d = self.scaled.ncols();
        let mean = r * (1.0 / r).exp() * 2.0 * self.pre.s;
        for round in 1..=self.cfg.max_rounds {
            let u = poisson(mean, rng)?;
            let mut sigma = Vec::new();
            let mut forms = Vec::new();
            if let Some(proposal) = &self.proposal {
                for _ in 0..u {
                    let rho = proposal.sample(rng);
                    let l = self.exact_form(rho);
                    let thin = l / (2.0 * self.pre.l_tilde[rho]);
                    if thin > 1.0 + RATIO_TOL {
                        return Err(Error::InvariantViolation(format!(
                            "thinning probability {thin} > 1 at row {rho}: leverage over-estimates are too small"
                        )));
                    }
                    if rng.random::<f64>() < thin {
                        sigma.push(rho);
                        forms.push(l);
                    }
                }
            }
            let t = sigma.len();
            let reduced = DMatrix::from_fn(t, d, |row, col| self.scaled[(sigma[row], col)] / (r * forms[row]).sqrt());
            let logdet_reduced = linalg::spd_logdet(&linalg::add_diagonal(&linalg::gram(&reduced), 1.0), "I + ÃᵀÃ")?;
            let log_ratio = self.pre.s_tilde + logdet_reduced - t as f64 / r - self.logdet_c_plus_i;
            if log_ratio > RATIO_TOL.ln_1p() {
                return Err(Error::InvariantViolation(format!(
                    "acceptance ratio {} exceeds 1",
                    log_ratio.exp()
                )));
            }
            if rng.random::<f64>() < log_ratio.exp() {
                let mut indices: Vec<usize> = if t == 0 {
                    Vec::new()
                } else {
                    SpectralDpp::new(&reduced, 1.0)?
                        .sample_positions(Some(&sigma), rng)
                        .into_iter()
                        .map(|pos| sigma[pos])
                        .collect()
                };
                indices.sort_unstable();
                return Ok(DppDraw {
                    indices,
                    method: DppMethod::Rejection,
                    rejection_rounds: round,
                });
            }
        }
        Err(Error::SamplerStalled {
            rounds: self.cfg.max_rounds,
        })
    }
}

pub fn dpp_sample_rejection<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    lambda: f64,
    pre: &LeveragePrecompute,
    cfg: RejectionConfig,
    rng: &mut R,
) -> Result<DppDraw> {
    RejectionDpp::new(a, lambda, pre.clone(), cfg)?.sample(rng)
}

/// Exact `Pr(S) = det((1/λ)A_S A_Sᵀ) / det(I + (1/λ)AᵀA)` for every subset.
pub fn subset_probability_oracle(a: &DMatrix<f64>, lambda: f64) -> Result<BTreeMap<Vec<usize>, f64>> {
    check_lambda(lambda)?;
    let (n, d) = a.shape();
    if n > ORACLE_MAX_N {
        return Err(Error::TooLarge { n, limit: ORACLE_MAX_N });
    }
    let kernel = (a * a.transpose()) / lambda;
    let mut weights = BTreeMap::new();
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let w = if subset.len() > d {
            0.0
        } else if subset.is_empty() {
            1.0
        } else {
            let sub = DMatrix::from_fn(subset.len(), subset.len(), |r, c| kernel[(subset[r], subset[c])]);
            sub.determinant().max(0.0)
        };
        total += w;
        weights.insert(subset, w);
    }
    let normalizer = linalg::add_diagonal(&linalg::gram(a), lambda).determinant() / lambda.powi(d as i32);
    if (total - normalizer).abs() > 1e-9 * normalizer.max(1.0) {
        return Err(Error::InvariantViolation(format!(
            "subset weights sum to {total}, expected det(I + AᵀA/λ) = {normalizer}"
        )));
    }
    weights.values_mut().for_each(|w| *w /= total);
    Ok(weights)
}
