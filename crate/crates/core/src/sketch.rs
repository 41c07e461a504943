//! Standard sketch families: Gaussian, Rademacher, uniform and importance row
//! sampling. All are scaled so that `E[SᵀS] = I`.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::check_lambda;
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub enum SketchFamily {
    Gaussian,
    Rademacher,
    UniformRows,
    ImportanceRows(Vec<f64>),
    /// Needs the data matrix; drawn through [`crate::surrogate`].
    Surrogate { lambda: f64 },
}

impl SketchFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SketchFamily::Gaussian => "gaussian",
            SketchFamily::Rademacher => "rademacher",
            SketchFamily::UniformRows => "uniform",
            SketchFamily::ImportanceRows(_) => "importance",
            SketchFamily::Surrogate { .. } => "surrogate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchSpec {
    pub family: SketchFamily,
    pub m: usize,
    pub seed: u64,
}

impl SketchSpec {
    pub fn new(family: SketchFamily, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("sketch size must be at least 1"));
        }
        match &family {
            SketchFamily::ImportanceRows(p) => validate_probabilities(p)?,
            SketchFamily::Surrogate { lambda } => check_lambda(*lambda)?,
            _ => {}
        }
        Ok(Self { family, m, seed })
    }

    /// Stream for the `draw`-th sample of this spec.
    pub fn stream(&self, draw: u64) -> StreamRng {
        rng::stream(self.seed, &[draw])
    }
}

/// One sampled row `w·e_iᵀ` of a row-sampling sketch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledRow {
    pub index: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SketchSample {
    /// Dense `m × n` sketching matrix.
    Dense(DMatrix<f64>),
    /// Row-sampling sketch over `n` data rows, applied by gather-and-scale.
    Rows { rows: Vec<SampledRow>, n: usize },
}

impl SketchSample {
    /// `S = I_n`, i.e. the full data.
    pub fn identity(n: usize) -> Self {
        SketchSample::Rows {
            rows: (0..n).map(|index| SampledRow { index, weight: 1.0 }).collect(),
            n,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            SketchSample::Dense(s) => s.ncols(),
            SketchSample::Rows { n, .. } => *n,
        }
    }

    pub fn row_count(&self) -> usize {
        match self {
            SketchSample::Dense(s) => s.nrows(),
            SketchSample::Rows { rows, .. } => rows.len(),
        }
    }

    /// Explicit `m × n` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            SketchSample::Dense(s) => s.clone(),
            SketchSample::Rows { rows, n } => {
                let mut s = DMatrix::zeros(rows.len(), *n);
                for (r, row) in rows.iter().enumerate() {
                    s[(r, row.index)] = row.weight;
                }
                s
            }
        }
    }

    /// `SA`.
    pub fn apply_matrix(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(a.nrows())?;
        Ok(match self {
            SketchSample::Dense(s) => s * a,
            SketchSample::Rows { rows, .. } => linalg::gather_rows(a, &pairs(rows)),
        })
    }

    /// `Sb`.
    pub fn apply_vector(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_rows(b.len())?;
        Ok(match self {
            SketchSample::Dense(s) => s * b,
            SketchSample::Rows { rows, .. } => linalg::gather_entries(b, &pairs(rows)),
        })
    }

    /// `AᵀSᵀSA`.
    pub fn sketched_gram(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(linalg::gram(&self.apply_matrix(a)?))
    }

    fn check_rows(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch {
                what: "sketch columns",
                expected: self.n(),
                found: n,
            });
        }
        Ok(())
    }
}

fn pairs(rows: &[SampledRow]) -> Vec<(usize, f64)> {
    rows.iter().map(|r| (r.index, r.weight)).collect()
}

pub(crate) fn validate_probabilities(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid("probability vector is empty"));
    }
    if let Some(bad) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!("probabilities must be nonnegative, found {bad}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// I.i.d. row sampler with weights `1/√(p_i·m)`.
#[derive(Debug, Clone)]
pub struct RowSampler {
    p: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl RowSampler {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        validate_probabilities(&p)?;
        let index = WeightedIndex::new(&p).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Self { p, index })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }

    /// Weight of row `i` in a size-`m` sketch.
    pub fn weight(&self, i: usize, m: usize) -> f64 {
        1.0 / (self.p[i] * m as f64).sqrt()
    }

    pub fn draw<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> SketchSample {
        let rows = (0..m)
            .map(|_| {
                let index = self.draw_index(rng);
                SampledRow {
                    index,
                    weight: self.weight(index, m),
                }
            })
            .collect();
        SketchSample::Rows { rows, n: self.p.len() }
    }
}

pub fn draw_sketch<R: Rng + ?Sized>(spec: &SketchSpec, n: usize, rng: &mut R) -> Result<SketchSample> {
    if n == 0 {
        return Err(Error::invalid("cannot sketch an empty data set"));
    }
    let m = spec.m;
    let scale = 1.0 / (m as f64).sqrt();
    match &spec.family {
        SketchFamily::Gaussian => Ok(SketchSample::Dense(DMatrix::from_fn(m, n, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            z * scale
        }))),
        SketchFamily::Rademacher => Ok(SketchSample::Dense(DMatrix::from_fn(m, n, |_, _| {
            if rng.random::<bool>() {
                scale
            } else {
                -scale
            }
        }))),
        SketchFamily::UniformRows => Ok(RowSampler::uniform(n)?.draw(m, rng)),
        SketchFamily::ImportanceRows(p) => {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "importance probabilities",
                    expected: n,
                    found: p.len(),
                });
            }
            Ok(RowSampler::new(p.clone())?.draw(m, rng))
        }
        SketchFamily::Surrogate { .. } => Err(Error::Config(
            "surrogate sketches depend on the data matrix; draw them with surrogate::SurrogateSketcher".into(),
        )),
    }
}

/// `(SA, Sb)`.
pub fn apply_sketch(
    s: &SketchSample,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    Ok((s.apply_matrix(a)?, s.apply_vector(b)?))
}

/// Ridge leverage scores `l_i(λ) = aᵢᵀ(AᵀA + λI)⁻¹aᵢ`.
pub fn ridge_leverage_scores(a: &DMatrix<f64>, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    linalg::check_finite_matrix(a, "data matrix")?;
    let h = linalg::add_diagonal(&linalg::gram(a), lambda);
    let chol = linalg::cholesky(&h, "AᵀA + λI")?;
    // columns of X = H⁻¹Aᵀ; l_i = a_i · X[:, i]
    let x = chol.solve(&a.transpose());
    Ok((0..a.nrows())
        .map(|i| a.row(i).iter().zip(x.column(i).iter()).map(|(u, v)| u * v).sum::<f64>().max(0.0))
        .collect())
}

/// `p_i = l_i(λ)/d_λ`.
pub fn ridge_leverage_probabilities(a: &DMatrix<f64>, lambda: f64) -> Result<Vec<f64>> {
    let l = ridge_leverage_scores(a, lambda)?;
    let total: f64 = l.iter().sum();
    if total <= 0.0 {
        // A = 0: every row is equally (un)important.
        return Ok(vec![1.0 / a.nrows() as f64; a.nrows()]);
    }
    let mut p: Vec<f64> = l.iter().map(|v| v / total).collect();
    // renormalize so the sum is 1 to the last ulp
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::effective_dimension;
    use crate::rng::stream;

    fn seeded_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut r = stream(seed, &[99]);
        DMatrix::from_fn(n, d, |_, _| r.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn uniform_rows_have_expected_weight() {
        let spec = SketchSpec::new(SketchFamily::UniformRows, 2, 3).unwrap();
        let s = draw_sketch(&spec, 4, &mut spec.stream(0)).unwrap();
        match s {
            SketchSample::Rows { rows, n } => {
                assert_eq!(n, 4);
                assert_eq!(rows.len(), 2);
                for r in rows {
                    assert!((r.weight - 2f64.sqrt()).abs() < 1e-15);
                }
            }
            _ => panic!("expected row sample"),
        }
    }

    #[test]
    fn rademacher_support() {
        let spec = SketchSpec::new(SketchFamily::Rademacher, 5, 11).unwrap();
        let s = draw_sketch(&spec, 7, &mut spec.stream(0)).unwrap().to_matrix();
        let v = 1.0 / 5f64.sqrt();
        assert!(s.iter().all(|x| (x.abs() - v).abs() < 1e-15));
    }

    #[test]
    fn determinism_per_seed() {
        for fam in [SketchFamily::Gaussian, SketchFamily::Rademacher, SketchFamily::UniformRows] {
            let spec = SketchSpec::new(fam, 4, 5).unwrap();
            let a = draw_sketch(&spec, 9, &mut spec.stream(3)).unwrap();
            let b = draw_sketch(&spec, 9, &mut spec.stream(3)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn importance_rows_reject_bad_probabilities() {
        assert!(SketchSpec::new(SketchFamily::ImportanceRows(vec![0.5, 0.6]), 2, 0).is_err());
        assert!(SketchSpec::new(SketchFamily::ImportanceRows(vec![1.5, -0.5]), 2, 0).is_err());
        // zero-probability rows are allowed and never drawn
        let spec = SketchSpec::new(SketchFamily::ImportanceRows(vec![0.0, 1.0]), 50, 0).unwrap();
        match draw_sketch(&spec, 2, &mut spec.stream(0)).unwrap() {
            SketchSample::Rows { rows, .. } => assert!(rows.iter().all(|r| r.index == 1)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn surrogate_family_needs_data() {
        let spec = SketchSpec::new(SketchFamily::Surrogate { lambda: 1.0 }, 3, 0).unwrap();
        assert!(matches!(draw_sketch(&spec, 4, &mut spec.stream(0)), Err(Error::Config(_))));
    }

    #[test]
    fn apply_identity_and_single_row() {
        let a = seeded_matrix(5, 3, 1);
        let b = DVector::from_fn(5, |i, _| i as f64);
        let (sa, sb) = apply_sketch(&SketchSample::identity(5), &a, &b).unwrap();
        assert_eq!(sa, a);
        assert_eq!(sb, b);
        let single = SketchSample::Rows {
            rows: vec![SampledRow { index: 2, weight: 3.0 }],
            n: 5,
        };
        let (sa, sb) = apply_sketch(&single, &a, &b).unwrap();
        assert_eq!(sa.row(0), a.row(2) * 3.0);
        assert_eq!(sb[0], 6.0);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let a = seeded_matrix(5, 3, 1);
        assert!(SketchSample::identity(4).apply_matrix(&a).is_err());
    }

    #[test]
    fn gather_matches_explicit_product() {
        let a = seeded_matrix(30, 4, 2);
        let b = DVector::from_fn(30, |i, _| (i as f64).sin());
        for fam in [SketchFamily::UniformRows, SketchFamily::Gaussian] {
            let spec = SketchSpec::new(fam, 12, 8).unwrap();
            let s = draw_sketch(&spec, 30, &mut spec.stream(0)).unwrap();
            let (sa, sb) = apply_sketch(&s, &a, &b).unwrap();
            let dense = s.to_matrix();
            assert!((sa - &dense * &a).norm() < 1e-12);
            assert!((sb - &dense * &b).norm() < 1e-12);
        }
    }

    #[test]
    fn leverage_probability_examples() {
        let p = ridge_leverage_probabilities(&DMatrix::identity(2, 2), 1.0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let a = DMatrix::from_row_slice(2, 2, &[3f64.sqrt(), 0.0, 0.0, 1.0]);
        let l = ridge_leverage_scores(&a, 1.0).unwrap();
        assert!((l[0] - 0.75).abs() < 1e-14 && (l[1] - 0.5).abs() < 1e-14);
        let p = ridge_leverage_probabilities(&a, 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-14 && (p[1] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn leverage_matches_row_by_row_oracle() {
        let a = seeded_matrix(20, 4, 20);
        let lambda = 0.7;
        let h = linalg::add_diagonal(&a.tr_mul(&a), lambda);
        let h_inv = h.clone().try_inverse().unwrap();
        let l = ridge_leverage_scores(&a, lambda).unwrap();
        let d_lambda = effective_dimension(&a, lambda).unwrap();
        for i in 0..20 {
            let ai = a.row(i).transpose();
            let oracle = ai.dot(&(&h_inv * &ai));
            assert!((l[i] - oracle).abs() < 1e-10);
        }
        assert!((l.iter().sum::<f64>() - d_lambda).abs() < 1e-10);
        let p = ridge_leverage_probabilities(&a, lambda).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
