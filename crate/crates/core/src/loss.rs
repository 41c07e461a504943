//! Convex losses of the form `f(x) = w·Σ ℓᵢ(aᵢᵀx) + (ρ/2)‖x − c‖²` and their
//! local least-squares models.
//!
//! | kind        | `ℓᵢ(z)`                         | ridge `ρ` | center `c` | default `w` |
//! |-------------|---------------------------------|-----------|------------|-------------|
//! | quadratic   | `½(z − bᵢ)²`                    | `λ`       | `0`        | `1`         |
//! | logistic    | `log(1 + eᶻ) − bᵢz`             | `λ`       | `0`        | `1/n`       |
//! | log-barrier | `−log(t − z) − log(t + z)`      | `2λ`      | `c`        | `1`         |
//!
//! At an iterate `x` the local model is `(A_t, b_t)` with rows
//! `√(w·ℓ″ᵢ)·aᵢᵀ` and entries `√w·ℓ′ᵢ/√ℓ″ᵢ`, so that `H(x) = A_tᵀA_t + ρI` and
//! `g(x) = A_tᵀb_t + ρ(x − c)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::check_lambda;

/// Curvatures below this are treated as zero when forming `A_t`.
pub const CURVATURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `w = 1/n`
    Mean,
    /// `w = 1`
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    Quadratic { b: DVector<f64> },
    Logistic { labels: DVector<f64> },
    LogBarrier { t: f64, c: DVector<f64> },
}

#[derive(Debug, Clone)]
pub struct LossModel {
    kind: LossKind,
    a: DMatrix<f64>,
    lambda: f64,
    normalization: Normalization,
}

#[derive(Debug, Clone)]
pub struct LocalModel {
    pub a_t: DMatrix<f64>,
    pub b_t: DVector<f64>,
    pub x_t: DVector<f64>,
    /// `x_t − c`; the vector multiplied by the regularizer in the gradient.
    pub shift: DVector<f64>,
    /// `ρ`
    pub ridge: f64,
    /// Gradient carried by rows whose curvature fell under the floor.
    pub grad_extra: DVector<f64>,
}

impl LocalModel {
    pub fn hessian(&self) -> DMatrix<f64> {
        linalg::add_diagonal(&linalg::gram(&self.a_t), self.ridge)
    }

    pub fn gradient(&self) -> DVector<f64> {
        self.a_t.tr_mul(&self.b_t) + &self.shift * self.ridge + &self.grad_extra
    }

    /// Exact Newton step `−H⁻¹g`.
    pub fn newton_step(&self) -> Result<DVector<f64>> {
        Ok(-linalg::spd_solve(&self.hessian(), &self.gradient(), "local Hessian")?)
    }
}

impl LossModel {
    /// `½‖Ax − b‖² + (λ/2)‖x‖²`
    pub fn quadratic(a: DMatrix<f64>, b: DVector<f64>, lambda: f64) -> Result<Self> {
        check_rows(&a, b.len(), "targets")?;
        linalg::check_finite_vector(&b, "targets")?;
        Self::build(LossKind::Quadratic { b }, a, lambda, Normalization::Sum)
    }

    /// `(1/n)Σ[log(1 + e^{aᵢᵀx}) − bᵢaᵢᵀx] + (λ/2)‖x‖²` with `bᵢ ∈ {0, 1}`.
    pub fn logistic(a: DMatrix<f64>, labels: DVector<f64>, lambda: f64) -> Result<Self> {
        check_rows(&a, labels.len(), "labels")?;
        if let Some(bad) = labels.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(Error::invalid(format!("logistic labels must be 0 or 1, found {bad}")));
        }
        Self::build(LossKind::Logistic { labels }, a, lambda, Normalization::Mean)
    }

    /// `−Σ log(t − aᵢᵀx) − Σ log(t + aᵢᵀx) + λ‖x − c‖²`
    pub fn log_barrier(a: DMatrix<f64>, t: f64, c: DVector<f64>, lambda: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("barrier half-width must be positive, got {t}")));
        }
        if c.len() != a.ncols() {
            return Err(Error::DimensionMismatch {
                what: "barrier center",
                expected: a.ncols(),
                found: c.len(),
            });
        }
        linalg::check_finite_vector(&c, "barrier center")?;
        Self::build(LossKind::LogBarrier { t, c }, a, lambda, Normalization::Sum)
    }

    fn build(kind: LossKind, a: DMatrix<f64>, lambda: f64, normalization: Normalization) -> Result<Self> {
        check_lambda(lambda)?;
        linalg::check_finite_matrix(&a, "data matrix")?;
        Ok(Self {
            kind,
            a,
            lambda,
            normalization,
        })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    /// Coefficient `ρ` of the identity in the Hessian.
    pub fn ridge(&self) -> f64 {
        match self.kind {
            LossKind::LogBarrier { .. } => 2.0 * self.lambda,
            _ => self.lambda,
        }
    }

    fn weight(&self) -> f64 {
        match self.normalization {
            Normalization::Mean => 1.0 / self.n() as f64,
            Normalization::Sum => 1.0,
        }
    }

    fn center_shift(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            LossKind::LogBarrier { c, .. } => x - c,
            _ => x.clone(),
        }
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                what: "iterate",
                expected: self.d(),
                found: x.len(),
            });
        }
        linalg::check_finite_vector(x, "iterate")?;
        let z = &self.a * x;
        if let LossKind::LogBarrier { t, .. } = self.kind {
            if let Some((i, v)) = z.iter().enumerate().find(|(_, v)| v.abs() >= t) {
                return Err(Error::InfeasiblePoint(format!("|a_{i}ᵀx| = {} ≥ t = {t}", v.abs())));
            }
        }
        Ok(z)
    }

    /// Whether `x` lies in the domain of `f`.
    pub fn is_feasible(&self, x: &DVector<f64>) -> bool {
        self.check_point(x).is_ok()
    }

    /// `(ℓᵢ(zᵢ), ℓ′ᵢ(zᵢ), ℓ″ᵢ(zᵢ))` for one row.
    fn scalar(&self, i: usize, z: f64) -> (f64, f64, f64) {
        match &self.kind {
            LossKind::Quadratic { b } => {
                let r = z - b[i];
                (0.5 * r * r, r, 1.0)
            }
            LossKind::Logistic { labels } => {
                let s = sigmoid(z);
                (softplus(z) - labels[i] * z, s - labels[i], s * (1.0 - s))
            }
            LossKind::LogBarrier { t, .. } => {
                let (u, v) = (t - z, t + z);
                (-u.ln() - v.ln(), 1.0 / u - 1.0 / v, 1.0 / (u * u) + 1.0 / (v * v))
            }
        }
    }

    pub fn objective(&self, x: &DVector<f64>) -> Result<f64> {
        let z = self.check_point(x)?;
        let data: f64 = z.iter().enumerate().map(|(i, &zi)| self.scalar(i, zi).0).sum();
        Ok(self.weight() * data + 0.5 * self.ridge() * self.center_shift(x).norm_squared())
    }

    pub fn objective_gradient_hessian(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let z = self.check_point(x)?;
        let (n, d) = self.a.shape();
        let w = self.weight();
        let rho = self.ridge();
        let shift = self.center_shift(x);
        let mut value = 0.0;
        let mut coef = DVector::zeros(n);
        let mut scaled = self.a.clone();
        for i in 0..n {
            let (l, l1, l2) = self.scalar(i, z[i]);
            value += l;
            coef[i] = w * l1;
            scaled.row_mut(i).scale_mut((w * l2).sqrt());
        }
        let grad = self.a.tr_mul(&coef) + &shift * rho;
        let hess = linalg::add_diagonal(&linalg::gram(&scaled), rho);
        debug_assert_eq!(grad.len(), d);
        Ok((w * value + 0.5 * rho * shift.norm_squared(), grad, hess))
    }

    pub fn local_model(&self, x: &DVector<f64>) -> Result<LocalModel> {
        let z = self.check_point(x)?;
        let (n, d) = self.a.shape();
        let w = self.weight();
        let mut a_t = self.a.clone();
        let mut b_t = DVector::zeros(n);
        let mut grad_extra = DVector::zeros(d);
        for i in 0..n {
            let (_, l1, l2) = self.scalar(i, z[i]);
            if l2 < CURVATURE_FLOOR {
                a_t.row_mut(i).fill(0.0);
                grad_extra += self.a.row(i).transpose() * (w * l1);
            } else {
                a_t.row_mut(i).scale_mut((w * l2).sqrt());
                b_t[i] = w.sqrt() * l1 / l2.sqrt();
            }
        }
        Ok(LocalModel {
            a_t,
            b_t,
            x_t: x.clone(),
            shift: self.center_shift(x),
            ridge: self.ridge(),
            grad_extra,
        })
    }

    /// Minimizer of `f`, by damped Newton iterations to a gradient tolerance
    /// (a single Cholesky solve for the quadratic loss).
    pub fn minimize(&self) -> Result<DVector<f64>> {
        let d = self.d();
        if let LossKind::Quadratic { b } = &self.kind {
            let h = linalg::add_diagonal(&linalg::gram(&self.a), self.ridge());
            return linalg::spd_solve(&h, &self.a.tr_mul(b), "AᵀA + λI");
        }
        let mut x = match &self.kind {
            LossKind::LogBarrier { c, .. } if self.is_feasible(c) => c.clone(),
            _ => DVector::zeros(d),
        };
        let params = LineSearchParams::default();
        for _ in 0..200 {
            let (_, g, h) = self.objective_gradient_hessian(&x)?;
            let dir = -linalg::spd_solve(&h, &g, "Hessian")?;
            let decrement = -g.dot(&dir);
            if decrement <= 1e-28 * (1.0 + self.objective(&x)?.abs()) {
                return Ok(x);
            }
            let alpha = backtracking_line_search(self, &x, &dir, &params)?;
            x += dir * alpha;
        }
        Err(Error::Numerical("Newton's method did not converge in 200 iterations".into()))
    }
}

fn check_rows(a: &DMatrix<f64>, len: usize, what: &'static str) -> Result<()> {
    if a.nrows() != len {
        return Err(Error::DimensionMismatch {
            what,
            expected: a.nrows(),
            found: len,
        });
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub tau: f64,
    pub c: f64,
    pub a0: f64,
    pub max_halvings: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            tau: 2.0,
            c: 0.1,
            a0: 1.0,
            max_halvings: 60,
        }
    }
}

/// Rounding allowance on the sufficient-decrease test, relative to `|f(x)|`.
pub const ARMIJO_SLACK: f64 = 4.0 * f64::EPSILON;

/// Largest `α = a0/τᵏ` with `x + α·dir` feasible and
/// `f(x + α·dir) ≤ f(x) + c·α·min(gᵀdir, 0) + ARMIJO_SLACK·|f(x)|`.
pub fn backtracking_line_search(
    loss: &LossModel,
    x: &DVector<f64>,
    dir: &DVector<f64>,
    params: &LineSearchParams,
) -> Result<f64> {
    if !(params.tau > 1.0) || !(params.c > 0.0 && params.c < 1.0) || !(params.a0 > 0.0) {
        return Err(Error::invalid("line search needs tau > 1, 0 < c < 1 and a0 > 0"));
    }
    let (f0, g, _) = loss.objective_gradient_hessian(x)?;
    let slope = g.dot(dir).min(0.0);
    let slack = ARMIJO_SLACK * f0.abs();
    let mut alpha = params.a0;
    for _ in 0..=params.max_halvings {
        let trial = x + dir * alpha;
        if let Ok(f) = loss.objective(&trial) {
            if f <= f0 + params.c * alpha * slope + slack {
                return Ok(alpha);
            }
        }
        alpha /= params.tau;
    }
    Err(Error::LineSearchFailed {
        halvings: params.max_halvings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut r = stream(seed, &[2]);
        DMatrix::from_fn(n, d, |_, _| r.sample::<f64, _>(StandardNormal))
    }

    fn logistic_instance(seed: u64) -> LossModel {
        let a = gaussian(40, 4, seed);
        let mut r = stream(seed, &[3]);
        let labels = DVector::from_fn(40, |_, _| if r.random::<bool>() { 1.0 } else { 0.0 });
        LossModel::logistic(a, labels, 0.1).unwrap()
    }

    fn barrier_instance(seed: u64) -> LossModel {
        let a = gaussian(30, 3, seed);
        let c = DVector::from_vec(vec![0.3, -0.2, 0.1]);
        LossModel::log_barrier(a, 2.0, c, 0.5).unwrap()
    }

    fn quadratic_instance(seed: u64) -> LossModel {
        let a = gaussian(25, 3, seed);
        let b = DVector::from_fn(25, |i, _| (i as f64).sin());
        LossModel::quadratic(a, b, 0.7).unwrap()
    }

    fn finite_difference_check(loss: &LossModel, x: &DVector<f64>) {
        let (_, g, h) = loss.objective_gradient_hessian(x).unwrap();
        let step = 1e-5;
        for j in 0..x.len() {
            let mut up = x.clone();
            let mut down = x.clone();
            up[j] += step;
            down[j] -= step;
            let fd = (loss.objective(&up).unwrap() - loss.objective(&down).unwrap()) / (2.0 * step);
            assert!((fd - g[j]).abs() <= 1e-4 * g.norm().max(1e-3), "gradient {j}: {fd} vs {}", g[j]);
            let (_, gu, _) = loss.objective_gradient_hessian(&up).unwrap();
            let (_, gd, _) = loss.objective_gradient_hessian(&down).unwrap();
            let col = (gu - gd) / (2.0 * step);
            assert!((col - h.column(j)).norm() <= 1e-4 * h.norm(), "Hessian column {j}");
        }
    }

    #[test]
    fn finite_differences_all_kinds() {
        let x = DVector::from_vec(vec![0.2, -0.1, 0.05]);
        finite_difference_check(&quadratic_instance(1), &x);
        finite_difference_check(&barrier_instance(2), &x);
        finite_difference_check(&logistic_instance(3), &DVector::from_vec(vec![0.3, -0.4, 0.2, 0.1]));
    }

    #[test]
    fn logistic_at_origin() {
        let loss = logistic_instance(4);
        let (_, _, h) = loss.objective_gradient_hessian(&DVector::zeros(4)).unwrap();
        let expect = linalg::add_diagonal(&(loss.a().tr_mul(loss.a()) / (4.0 * 40.0)), 0.1);
        assert!((h - expect).norm() < 1e-12);
    }

    #[test]
    fn barrier_gradient_at_origin() {
        let loss = barrier_instance(5);
        let (_, g, _) = loss.objective_gradient_hessian(&DVector::zeros(3)).unwrap();
        let c = DVector::from_vec(vec![0.3, -0.2, 0.1]);
        assert!((g + c * (2.0 * 0.5)).norm() < 1e-12);
    }

    #[test]
    fn barrier_rejects_infeasible_points() {
        let loss = barrier_instance(6);
        let far = DVector::from_vec(vec![100.0, 0.0, 0.0]);
        assert!(matches!(loss.local_model(&far), Err(Error::InfeasiblePoint(_))));
    }

    #[test]
    fn quadratic_local_model_is_static() {
        let loss = quadratic_instance(7);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = loss.local_model(&x).unwrap();
        assert_eq!(&m.a_t, loss.a());
        let (_, g, _) = loss.objective_gradient_hessian(&x).unwrap();
        assert!((m.gradient() - g).norm() < 1e-12);
    }

    #[test]
    fn saturated_logistic_rows_are_clamped() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let loss = LossModel::logistic(a, DVector::from_vec(vec![1.0, 0.0]), 1e-3).unwrap();
        let x = DVector::from_vec(vec![60.0]);
        let m = loss.local_model(&x).unwrap();
        assert!(m.a_t.iter().all(|v| *v == 0.0));
        let (_, g, h) = loss.objective_gradient_hessian(&x).unwrap();
        assert!((m.gradient() - &g).norm() <= 1e-12 * g.norm());
        assert!((m.hessian() - h).norm() <= 1e-9);
    }

    #[test]
    fn newton_step_on_one_dimensional_square() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let loss = LossModel::quadratic(a, DVector::from_vec(vec![0.0]), 1.0).unwrap();
        // f(x) = x², x = 1, Newton direction −1·H⁻¹g = −1
        let alpha = backtracking_line_search(
            &loss,
            &DVector::from_vec(vec![1.0]),
            &DVector::from_vec(vec![-1.0]),
            &LineSearchParams::default(),
        )
        .unwrap();
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn barrier_line_search_stays_feasible() {
        let loss = barrier_instance(8);
        let x = DVector::zeros(3);
        let (_, g, _) = loss.objective_gradient_hessian(&x).unwrap();
        let dir = -g.normalize() * 50.0;
        let alpha = backtracking_line_search(&loss, &x, &dir, &LineSearchParams::default()).unwrap();
        // bisection for the first infeasible step along dir
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if loss.is_feasible(&(&x + &dir * mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!(alpha < hi, "{alpha} vs boundary {hi}");
    }

    #[test]
    fn minimizer_has_zero_gradient() {
        for loss in [logistic_instance(9), barrier_instance(10), quadratic_instance(11)] {
            let x = loss.minimize().unwrap();
            let (_, g, _) = loss.objective_gradient_hessian(&x).unwrap();
            assert!(g.norm() < 1e-9, "{}", g.norm());
        }
    }

    fn point(d: usize) -> impl Strategy<Value = DVector<f64>> {
        prop::collection::vec(-0.5f64..0.5, d).prop_map(DVector::from_vec)
    }

    fn assert_reconstructs(loss: &LossModel, x: &DVector<f64>) {
        let (_, g, h) = loss.objective_gradient_hessian(x).unwrap();
        let m = loss.local_model(x).unwrap();
        assert!((m.hessian() - &h).norm() <= 1e-10 * h.norm());
        assert!((m.gradient() - &g).norm() <= 1e-10 * g.norm() + 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn local_model_reconstruction(x3 in point(3), x4 in point(4), seed in 0u64..1000) {
            assert_reconstructs(&quadratic_instance(seed), &x3);
            assert_reconstructs(&barrier_instance(seed), &(x3.clone() * 0.2));
            assert_reconstructs(&logistic_instance(seed), &(x4 * 4.0));
        }

        #[test]
        fn armijo_holds_for_returned_steps(x in point(4), dir in point(4), seed in 0u64..1000) {
            let loss = logistic_instance(seed);
            let x = x * 3.0;
            let dir = dir * 10.0;
            let params = LineSearchParams::default();
            let alpha = backtracking_line_search(&loss, &x, &dir, &params).unwrap();
            let (f0, g, _) = loss.objective_gradient_hessian(&x).unwrap();
            let f1 = loss.objective(&(&x + &dir * alpha)).unwrap();
            prop_assert!(f1 <= f0 + params.c * alpha * g.dot(&dir).min(0.0) + ARMIJO_SLACK * f0.abs());
        }
    }
}
