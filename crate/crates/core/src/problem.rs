//! Regularized least squares and its Hessian. Also hosts the λ-effective
//! dimension and the scaled local regularizer derived from it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance for SPD checks and residuals.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// `min_x ½‖Ax − b‖² + (λ/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct Problem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
}

impl Problem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, lambda: f64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::invalid("data matrix must have at least one row and one column"));
        }
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                what: "target vector",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        check_lambda(lambda)?;
        linalg::check_finite_matrix(&a, "data matrix")?;
        linalg::check_finite_vector(&b, "target vector")?;
        Ok(Self { a, b, lambda })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn objective(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let r = &self.a * x - &self.b;
        Ok(0.5 * r.norm_squared() + 0.5 * self.lambda * x.norm_squared())
    }

    pub fn effective_dimension(&self) -> f64 {
        effective_dimension_of_gram(&linalg::gram(&self.a), self.lambda)
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                what: "iterate",
                expected: self.d(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("regularizer must be positive and finite, got {lambda}")));
    }
    Ok(())
}

/// A symmetric positive-definite Hessian with its extreme eigenvalues.
#[derive(Debug, Clone)]
pub struct Hessian {
    matrix: DMatrix<f64>,
    lambda_min: f64,
    lambda_max: f64,
}

impl Hessian {
    /// Wraps an SPD matrix; eigenvalues are computed exactly.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid("Hessian must be square"));
        }
        let matrix = linalg::symmetrize(matrix);
        let vals = linalg::sym_eigenvalues(&matrix);
        let lambda_min = vals.first().copied().unwrap_or(0.0);
        let lambda_max = vals.last().copied().unwrap_or(0.0);
        if lambda_min <= 0.0 {
            return Err(Error::NotPositiveDefinite("Hessian"));
        }
        Ok(Self {
            matrix,
            lambda_min,
            lambda_max,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn kappa(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        linalg::spd_solve(&self.matrix, rhs, "Hessian")
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        linalg::spd_inverse(&self.matrix, "Hessian")
    }
}

/// `λ′ = λ(1 − d_λ/m)` together with the Poisson intensity `γ = m − d_λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledRegularizer {
    pub lambda: f64,
    pub lambda_prime: f64,
    pub d_lambda: f64,
    pub m: usize,
    pub gamma: f64,
}

/// `tr(AᵀA(AᵀA + λI)⁻¹)`.
pub fn effective_dimension(a: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    linalg::check_finite_matrix(a, "data matrix")?;
    Ok(effective_dimension_of_gram(&linalg::gram(a), lambda))
}

/// Effective dimension from a precomputed Gram matrix `AᵀA`.
pub fn effective_dimension_of_gram(gram: &DMatrix<f64>, lambda: f64) -> f64 {
    linalg::sym_eigenvalues(gram)
        .into_iter()
        .map(|mu| {
            let mu = mu.max(0.0);
            mu / (mu + lambda)
        })
        .sum()
}

pub fn scaled_regularizer(lambda: f64, d_lambda: f64, m: usize) -> Result<ScaledRegularizer> {
    check_lambda(lambda)?;
    if !(d_lambda.is_finite() && d_lambda >= 0.0) {
        return Err(Error::invalid(format!("effective dimension must be nonnegative, got {d_lambda}")));
    }
    if m == 0 || (m as f64) <= d_lambda {
        return Err(Error::InfeasibleSketchSize { m, d_lambda });
    }
    let gamma = m as f64 - d_lambda;
    Ok(ScaledRegularizer {
        lambda,
        lambda_prime: lambda * gamma / m as f64,
        d_lambda,
        m,
        gamma,
    })
}

/// `H = AᵀA + λI` and `g = Aᵀ(Ax − b) + λx`.
pub fn hessian_and_gradient(p: &Problem, x: &DVector<f64>) -> Result<(Hessian, DVector<f64>)> {
    p.check_dim(x)?;
    let h = linalg::add_diagonal(&linalg::gram(&p.a), p.lambda);
    let residual = &p.a * x - &p.b;
    let g = p.a.tr_mul(&residual) + x * p.lambda;
    Ok((Hessian::from_matrix(h)?, g))
}

/// `√(vᵀMv)`, rejecting matrices whose quadratic form is negative beyond the
/// default tolerance.
pub fn mahalanobis_norm(v: &DVector<f64>, m: &DMatrix<f64>) -> Result<f64> {
    mahalanobis_norm_with_tol(v, m, DEFAULT_REL_TOL)
}

pub fn mahalanobis_norm_with_tol(v: &DVector<f64>, m: &DMatrix<f64>, rel_tol: f64) -> Result<f64> {
    if m.nrows() != m.ncols() || m.nrows() != v.len() {
        return Err(Error::DimensionMismatch {
            what: "Mahalanobis metric",
            expected: v.len(),
            found: m.nrows(),
        });
    }
    let q = v.dot(&(m * v));
    let scale = m.norm() * v.norm_squared();
    if q < -rel_tol * scale {
        return Err(Error::invalid("metric matrix is not positive semi-definite"));
    }
    Ok(q.max(0.0).sqrt())
}

/// `x* = (AᵀA + λI)⁻¹Aᵀb` by Cholesky.
pub fn solve_exact(p: &Problem) -> Result<DVector<f64>> {
    let h = linalg::add_diagonal(&linalg::gram(&p.a), p.lambda);
    linalg::spd_solve(&h, &p.a.tr_mul(&p.b), "AᵀA + λI")
}
