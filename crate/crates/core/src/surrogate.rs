//! Surrogate row-sampling sketches.
//!
//! A draw is the union of a DPP sample `S ∼ DPP((1/λ)AAᵀ)` and `M ∼ Poisson(γ)`
//! i.i.d. rows from `p`, with `γ = m − d_λ`. The combined index sequence is
//! randomly permuted and every entry `σᵢ` becomes the sketch row
//! `e_{σᵢ}ᵀ/√(m·p_{σᵢ})`, DPP rows included. The expected row count is `m`, and
//! with `λ′ = λγ/m` the sketched inverse Hessian is unbiased.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dpp::{poisson, DppMethod, RejectionConfig, RejectionDpp, SpectralDpp};
use crate::error::{Error, Result};
use crate::leverage::{LeveragePrecompute, PrecomputeMode};
use crate::linalg;
use crate::problem::{check_lambda, effective_dimension_of_gram, scaled_regularizer, ScaledRegularizer};
use crate::sketch::{ridge_leverage_probabilities, RowSampler, SampledRow, SketchSample};

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSample {
    pub dpp_indices: Vec<usize>,
    /// Multiset of i.i.d. indices, in draw order.
    pub iid_indices: Vec<usize>,
    pub gamma: f64,
    pub m: usize,
    pub lambda_prime: f64,
    pub d_lambda: f64,
    /// Permuted, weighted rows of `S̄`.
    pub rows: Vec<SampledRow>,
    pub n: usize,
}

impl SurrogateSample {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// The draw as a generic row-sampling sketch.
    pub fn sketch(&self) -> SketchSample {
        SketchSample::Rows {
            rows: self.rows.clone(),
            n: self.n,
        }
    }

    /// Unscaled `X̄ᵀX̄` rows: `e_iᵀ/√p_i` (so `S̄ = X̄/√m`).
    pub fn design_gram(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.sketch().sketched_gram(a)? * self.m as f64)
    }
}

#[derive(Debug, Clone)]
enum DppBackend {
    Spectral(SpectralDpp),
    Rejection(Box<RejectionDpp>),
}

/// Reusable state for repeated surrogate draws on a fixed `(A, λ, m, p)`.
/// `d_λ`, `γ` and `λ′` are computed once.
#[derive(Debug, Clone)]
pub struct SurrogateSketcher {
    n: usize,
    m: usize,
    regularizer: ScaledRegularizer,
    iid: RowSampler,
    dpp: DppBackend,
}

impl SurrogateSketcher {
    /// Surrogate leverage-score sampling: `p` = exact ridge leverage
    /// probabilities, spectral DPP sampler.
    pub fn leverage(a: &DMatrix<f64>, lambda: f64, m: usize) -> Result<Self> {
        let p = ridge_leverage_probabilities(a, lambda)?;
        Self::new(a, lambda, m, p)
    }

    pub fn new(a: &DMatrix<f64>, lambda: f64, m: usize, p: Vec<f64>) -> Result<Self> {
        let dpp = SpectralDpp::new(a, lambda)?;
        Self::build(a, lambda, m, p, DppBackend::Spectral(dpp))
    }

    /// Same distribution, DPP part drawn with the rejection sampler.
    pub fn with_rejection(
        a: &DMatrix<f64>,
        lambda: f64,
        m: usize,
        p: Vec<f64>,
        mode: PrecomputeMode,
        seed: u64,
    ) -> Result<Self> {
        let pre = LeveragePrecompute::for_ridge(a, lambda, mode, seed)?;
        let cfg = RejectionConfig::default_for(&pre);
        let dpp = RejectionDpp::new(a, lambda, pre, cfg)?;
        Self::build(a, lambda, m, p, DppBackend::Rejection(Box::new(dpp)))
    }

    fn build(a: &DMatrix<f64>, lambda: f64, m: usize, p: Vec<f64>, dpp: DppBackend) -> Result<Self> {
        check_lambda(lambda)?;
        if p.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                what: "sampling probabilities",
                expected: a.nrows(),
                found: p.len(),
            });
        }
        let iid = RowSampler::new(p)?;
        for i in 0..a.nrows() {
            if iid.probabilities()[i] == 0.0 && a.row(i).iter().any(|v| *v != 0.0) {
                return Err(Error::Config(format!(
                    "row {i} is nonzero but has sampling probability 0; a DPP draw could select it"
                )));
            }
        }
        let d_lambda = effective_dimension_of_gram(&linalg::gram(a), lambda);
        let regularizer = scaled_regularizer(lambda, d_lambda, m)?;
        Ok(Self {
            n: a.nrows(),
            m,
            regularizer,
            iid,
            dpp,
        })
    }

    pub fn regularizer(&self) -> ScaledRegularizer {
        self.regularizer
    }

    pub fn probabilities(&self) -> &[f64] {
        self.iid.probabilities()
    }

    pub fn dpp_method(&self) -> DppMethod {
        match self.dpp {
            DppBackend::Spectral(_) => DppMethod::Spectral,
            DppBackend::Rejection(_) => DppMethod::Rejection,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SurrogateSample> {
        // 1. S ~ DPP((1/λ)AAᵀ)
        let dpp_indices = match &self.dpp {
            DppBackend::Spectral(s) => s.sample(rng).indices,
            DppBackend::Rejection(r) => r.sample(rng)?.indices,
        };
        // 2. M ~ Poisson(γ), then M i.i.d. indices from p
        let count = poisson(self.regularizer.gamma, rng)? as usize;
        let iid_indices: Vec<usize> = (0..count).map(|_| self.iid.draw_index(rng)).collect();
        // 3. concatenate and permute
        let mut sequence: Vec<usize> = dpp_indices.iter().chain(iid_indices.iter()).copied().collect();
        sequence.shuffle(rng);
        // 4. row i of S̄ is e_{σᵢ}ᵀ/√(m·p_{σᵢ})
        let rows = sequence
            .into_iter()
            .map(|index| {
                if self.iid.probabilities()[index] <= 0.0 {
                    return Err(Error::Config(format!("DPP selected row {index} with zero probability")));
                }
                Ok(SampledRow {
                    index,
                    weight: self.iid.weight(index, self.m),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SurrogateSample {
            dpp_indices,
            iid_indices,
            gamma: self.regularizer.gamma,
            m: self.m,
            lambda_prime: self.regularizer.lambda_prime,
            d_lambda: self.regularizer.d_lambda,
            rows,
            n: self.n,
        })
    }
}

pub fn draw_surrogate<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    lambda: f64,
    m: usize,
    p: Vec<f64>,
    rng: &mut R,
) -> Result<SurrogateSample> {
    SurrogateSketcher::new(a, lambda, m, p)?.draw(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianVariant {
    /// `H̃ = AᵀS̄ᵀS̄A + λ′I`
    SketchAndSolve,
    /// `Ĥ = (λ/λ′)AᵀS̄ᵀS̄A + λI`
    NewtonSketch,
}

pub fn surrogate_sketched_hessian(
    samp: &SurrogateSample,
    a: &DMatrix<f64>,
    lambda: f64,
    variant: HessianVariant,
) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    let lp = samp.lambda_prime;
    if !(lp > 0.0) {
        return Err(Error::InfeasibleSketchSize {
            m: samp.m,
            d_lambda: samp.d_lambda,
        });
    }
    let g = samp.sketch().sketched_gram(a)?;
    Ok(match variant {
        HessianVariant::SketchAndSolve => linalg::add_diagonal(&g, lp),
        HessianVariant::NewtonSketch => linalg::add_diagonal(&(g * (lambda / lp)), lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn diag_example() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[3f64.sqrt(), 0.0, 0.0, 1.0])
    }

    #[test]
    fn regularizer_matches_formula() {
        let s = SurrogateSketcher::leverage(&diag_example(), 1.0, 3).unwrap();
        let r = s.regularizer();
        assert!((r.d_lambda - 1.25).abs() < 1e-12);
        assert!((r.gamma - 1.75).abs() < 1e-12);
        assert!((r.lambda_prime - 1.75 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_size() {
        assert!(matches!(
            SurrogateSketcher::leverage(&diag_example(), 1.0, 1),
            Err(Error::InfeasibleSketchSize { .. })
        ));
    }

    #[test]
    fn zero_probability_on_live_row_is_rejected() {
        let err = SurrogateSketcher::new(&diag_example(), 1.0, 3, vec![1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn rows_carry_step_four_weights() {
        let a = diag_example();
        let s = SurrogateSketcher::leverage(&a, 1.0, 3).unwrap();
        let mut rng = stream(5, &[]);
        for _ in 0..100 {
            let d = s.draw(&mut rng).unwrap();
            assert_eq!(d.row_count(), d.dpp_indices.len() + d.iid_indices.len());
            for row in &d.rows {
                let expect = 1.0 / (3.0 * s.probabilities()[row.index]).sqrt();
                assert!((row.weight - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hessian_variants_are_proportional() {
        let a = DMatrix::from_fn(15, 3, |i, j| ((i + 2 * j) as f64).cos());
        let lambda = 0.8;
        let s = SurrogateSketcher::leverage(&a, lambda, 6).unwrap();
        let mut rng = stream(6, &[]);
        for _ in 0..50 {
            let d = s.draw(&mut rng).unwrap();
            let tilde = surrogate_sketched_hessian(&d, &a, lambda, HessianVariant::SketchAndSolve).unwrap();
            let hat = surrogate_sketched_hessian(&d, &a, lambda, HessianVariant::NewtonSketch).unwrap();
            let scaled = &tilde * (lambda / d.lambda_prime);
            assert!((hat - &scaled).norm() <= 1e-12 * scaled.norm());
        }
    }

    #[test]
    fn empty_draw_gives_lambda_identity() {
        let a = diag_example();
        let samp = SurrogateSample {
            dpp_indices: vec![],
            iid_indices: vec![],
            gamma: 1.75,
            m: 3,
            lambda_prime: 1.75 / 3.0,
            d_lambda: 1.25,
            rows: vec![],
            n: 2,
        };
        let h = surrogate_sketched_hessian(&samp, &a, 1.0, HessianVariant::NewtonSketch).unwrap();
        assert_eq!(h, DMatrix::identity(2, 2));
    }
}
