//! Hilbert-norm geometry. A norm induced by an inner product on a
//! finite-dimensional space can be written as `‖x‖_Q = sqrt(xᵀQx)` for a
//! positive-definite `Q`; its dual is `‖y‖_* = sqrt(yᵀQ⁻¹y)`. All algorithms
//! in this crate run in such a geometry, and every `Q⁻¹` application goes
//! through a Cholesky factor cached at construction -- explicit inverses are
//! never formed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Absolute per-entry symmetry tolerance accepted at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A Hilbert norm `‖x‖_Q = sqrt(xᵀQx)` with its cached Cholesky factor.
///
/// Immutable after construction; safe to share across concurrent trials.
#[derive(Clone, Debug)]
pub struct NormSpace {
    dim: usize,
    q: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    euclidean: bool,
}

impl NormSpace {
    /// Builds the norm from a symmetric positive-definite matrix.
    ///
    /// The input is checked for symmetry to within [`SYMMETRY_TOL`] per entry
    /// and symmetrized as `(Q + Qᵀ)/2` before factoring, which guards against
    /// round-off accumulated by instance constructors.
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::DimensionMismatch {
                expected: q.nrows(),
                got: q.ncols(),
            });
        }
        let dim = q.nrows();
        if dim == 0 {
            return Err(Error::InvalidParameter("empty matrix".into()));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let delta = (q[(i, j)] - q[(j, i)]).abs();
                if delta > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric { row: i, col: j, delta });
                }
            }
        }
        let q = (&q + q.transpose()) * 0.5;
        let chol = Cholesky::new(q.clone()).ok_or(Error::NotPositiveDefinite)?;
        let euclidean = q == DMatrix::identity(dim, dim);
        Ok(Self { dim, q, chol, euclidean })
    }

    /// The Euclidean norm on `R^dim` (`Q = I`).
    pub fn euclidean(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn is_euclidean(&self) -> bool {
        self.euclidean
    }

    /// Lower-triangular Cholesky factor `L` with `Q = LLᵀ`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `‖x‖_Q²`, clamped at zero against round-off.
    pub fn norm_sq(&self, x: &DVector<f64>) -> f64 {
        if self.euclidean {
            return x.norm_squared();
        }
        x.dot(&(&self.q * x)).max(0.0)
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.norm_sq(x).sqrt()
    }

    /// Applies `Q⁻¹` through the cached factor (two triangular solves).
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.euclidean {
            return v.clone();
        }
        self.chol.solve(v)
    }

    /// `‖y‖_*² = yᵀQ⁻¹y`, clamped at zero.
    pub fn dual_norm_sq(&self, y: &DVector<f64>) -> Result<f64> {
        Error::check_dim(self.dim, y.len())?;
        if self.euclidean {
            return Ok(y.norm_squared());
        }
        Ok(y.dot(&self.solve(y)).max(0.0))
    }

    /// Dual norm `‖y‖_* = sup_{‖x‖_Q ≤ 1} ⟨x, y⟩`.
    pub fn dual_norm(&self, y: &DVector<f64>) -> Result<f64> {
        Ok(self.dual_norm_sq(y)?.sqrt())
    }

    /// Norm-aware gradient step: the unique minimizer of
    /// `η⟨g, x - x0⟩ + ½‖x0 - x‖_Q²`, namely `x0 - η Q⁻¹ g`.
    pub fn gradient_step(&self, x0: &DVector<f64>, g: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
        Error::check_dim(self.dim, x0.len())?;
        Error::check_dim(self.dim, g.len())?;
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {eta}")));
        }
        if self.euclidean {
            return Ok(x0 - g * eta);
        }
        Ok(x0 - self.solve(g) * eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn space(entries: &[f64], dim: usize) -> NormSpace {
        NormSpace::new(DMatrix::from_row_slice(dim, dim, entries)).unwrap()
    }

    #[test]
    fn euclidean_norm_is_pythagorean() {
        let s = NormSpace::euclidean(2);
        assert_relative_eq!(s.norm(&DVector::from_vec(vec![3.0, 4.0])), 5.0);
    }

    #[test]
    fn diagonal_quadratic_form() {
        let s = space(&[4.0, 0.0, 0.0, 1.0], 2);
        assert_relative_eq!(s.norm(&DVector::from_vec(vec![1.0, 1.0])), 5f64.sqrt());
    }

    #[test]
    fn dense_quadratic_form() {
        let s = space(&[2.0, 1.0, 1.0, 2.0], 2);
        assert_relative_eq!(s.norm(&DVector::from_vec(vec![1.0, 0.0])), 2f64.sqrt());
    }

    #[test]
    fn non_symmetric_is_rejected() {
        let err = NormSpace::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
    }

    #[test]
    fn indefinite_is_rejected() {
        // eigenvalues 3 and -1
        let err = NormSpace::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite));
    }

    #[test]
    fn dual_norm_euclidean_is_self_dual() {
        let s = NormSpace::euclidean(2);
        assert_relative_eq!(s.dual_norm(&DVector::from_vec(vec![3.0, 4.0])).unwrap(), 5.0);
    }

    #[test]
    fn dual_norm_diagonal() {
        let s = space(&[4.0, 0.0, 0.0, 1.0], 2);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        assert_relative_eq!(s.dual_norm(&y).unwrap(), 1.25f64.sqrt());
        assert_eq!(s.dual_norm(&DVector::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn dual_norm_dimension_mismatch() {
        let s = NormSpace::euclidean(2);
        assert!(matches!(
            s.dual_norm(&DVector::zeros(3)),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    /// Brute-force oracle: the dual norm is the supremum of `⟨x, y⟩` over the
    /// Q-unit sphere, estimated by random unit vectors.
    #[test]
    fn dual_norm_matches_sampled_supremum() {
        let s = space(&[4.0, 0.0, 0.0, 1.0], 2);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let mut rng = crate::stream_from_seed(7);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let raw = DVector::from_fn(2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let n = s.norm(&raw);
            if n < 1e-9 {
                continue;
            }
            best = best.max(raw.dot(&y) / n);
        }
        let dual = s.dual_norm(&y).unwrap();
        assert!((best - dual).abs() < 1e-2, "sup {best} vs dual {dual}");
    }

    #[test]
    fn gradient_step_euclidean() {
        let s = NormSpace::euclidean(2);
        let x = s
            .gradient_step(&DVector::zeros(2), &DVector::from_vec(vec![2.0, -4.0]), 0.5)
            .unwrap();
        assert_relative_eq!(x, DVector::from_vec(vec![-1.0, 2.0]));
    }

    #[test]
    fn gradient_step_diagonal_solve() {
        let s = space(&[4.0, 0.0, 0.0, 1.0], 2);
        let x = s
            .gradient_step(&DVector::zeros(2), &DVector::from_vec(vec![2.0, -4.0]), 0.5)
            .unwrap();
        assert_relative_eq!(x, DVector::from_vec(vec![-0.25, 2.0]), epsilon = 1e-14);
    }

    /// Oracle: scan random candidate points and check none improves the
    /// one-step model objective `η⟨g, x-x0⟩ + ½‖x0-x‖_Q²`.
    #[test]
    fn gradient_step_minimizes_model() {
        let s = space(&[2.0, 1.0, 1.0, 2.0], 2);
        let x0 = DVector::from_vec(vec![1.0, 1.0]);
        let g = DVector::from_vec(vec![3.0, 3.0]);
        let step = s.gradient_step(&x0, &g, 1.0).unwrap();
        assert_relative_eq!(step, DVector::zeros(2), epsilon = 1e-12);

        let model = |x: &DVector<f64>| g.dot(&(x - &x0)) + 0.5 * s.norm_sq(&(&x0 - x));
        let best = model(&step);
        let mut rng = crate::stream_from_seed(3);
        for _ in 0..20_000 {
            let cand = DVector::from_fn(2, |_, _| rng.random::<f64>() * 6.0 - 3.0);
            assert!(model(&cand) + 1e-12 >= best);
        }
    }

    fn arb_pd_matrix(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-2.0..2.0f64, dim * dim).prop_map(move |v| {
            let l = DMatrix::from_vec(dim, dim, v);
            &l * l.transpose() + DMatrix::identity(dim, dim) * 0.1
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norm_squared_equals_quadratic_form(q in arb_pd_matrix(3), v in proptest::collection::vec(-5.0..5.0f64, 3)) {
            let s = NormSpace::new(q.clone()).unwrap();
            let x = DVector::from_vec(v);
            let form = x.dot(&(&q * &x));
            prop_assert!((s.norm_sq(&x) - form).abs() <= 1e-10 * (1.0 + form.abs()));
        }

        #[test]
        fn cauchy_schwarz_in_the_pairing(q in arb_pd_matrix(3),
                                         xv in proptest::collection::vec(-5.0..5.0f64, 3),
                                         yv in proptest::collection::vec(-5.0..5.0f64, 3)) {
            let s = NormSpace::new(q).unwrap();
            let (x, y) = (DVector::from_vec(xv), DVector::from_vec(yv));
            prop_assert!(x.dot(&y) <= s.norm(&x) * s.dual_norm(&y).unwrap() + 1e-9);
        }

        #[test]
        fn gradient_step_is_stationary(q in arb_pd_matrix(3),
                                       x0v in proptest::collection::vec(-5.0..5.0f64, 3),
                                       gv in proptest::collection::vec(-5.0..5.0f64, 3),
                                       eta in 0.01..2.0f64) {
            let s = NormSpace::new(q.clone()).unwrap();
            let (x0, g) = (DVector::from_vec(x0v), DVector::from_vec(gv));
            let x1 = s.gradient_step(&x0, &g, eta).unwrap();
            // gradient of the model at the returned point
            let resid = &g * eta + &q * (&x1 - &x0);
            prop_assert!(resid.norm() <= 1e-9 * (1.0 + g.norm()));
        }
    }
}
