//! Ground-truth stochastic problem instances behind one uniform oracle
//! contract: a sample-gradient draw, the population gradient, the known
//! minimizer, the gradient-noise covariance at the optimum, and the
//! regularity constants `(μ, L, ζ, L_H, ω, σ₁, σ₂)` stated in the instance's
//! own norm.
//!
//! Samplers are pure given an explicit stream handle; instances hold no
//! mutable state, so concurrent trials each own a distinct stream and share
//! the instance.

mod logistic;

pub use logistic::{logistic_glm, logistic_glm_with_constant};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::normspace::NormSpace;
use crate::rng::SampleStream;

/// Regularity constants of an instance, stated in the instance norm.
///
/// `mu`/`l` are the strong-convexity and smoothness moduli, `zeta` the
/// multiplicative-noise modulus of the centered gradient noise in the dual
/// norm, `l_h` the Hessian Lipschitz constant in the Hessian-rescaled norm,
/// `omega` the smallest dual-norm gain of the Hessian at the optimum, and
/// `sigma1`/`sigma2` the sub-exponential noise parameters (unset for
/// quadratics, where they are not needed).
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceConstants {
    pub mu: f64,
    pub l: f64,
    pub zeta: f64,
    pub l_h: f64,
    pub omega: f64,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
}

impl InstanceConstants {
    fn validate(&self, quadratic: bool) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {}", self.mu)));
        }
        if self.zeta < 0.0 || self.l_h < 0.0 {
            return Err(Error::InvalidParameter("zeta and l_h must be nonnegative".into()));
        }
        let tol = 1e-9 * (1.0 + self.l.abs());
        if self.mu > self.omega + tol || self.omega > self.l + tol {
            return Err(Error::InvalidParameter(format!(
                "constants must satisfy mu <= omega <= L, got mu={} omega={} L={}",
                self.mu, self.omega, self.l
            )));
        }
        if quadratic != (self.l_h == 0.0) {
            return Err(Error::InvalidParameter(format!(
                "l_h = {} inconsistent with quadratic = {}",
                self.l_h, quadratic
            )));
        }
        Ok(())
    }
}

/// One realized sample `z`, exposed as the gradient map `x ↦ ∇f(x, z)`.
///
/// Keeping the sample callable lets the control-variate oracle evaluate the
/// same `z` at the query point and at the epoch anchor.
type GradMap = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

pub struct SampleGrad {
    f: Box<GradMap>,
}

impl SampleGrad {
    pub fn new(f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self { f: Box::new(f) }
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }
}

type DrawFn = dyn Fn(&mut SampleStream) -> SampleGrad + Send + Sync;
type PopGradFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type QuadPairFn = dyn Fn(&mut SampleStream) -> (DMatrix<f64>, DVector<f64>) + Send + Sync;

/// A stochastic optimization instance with known ground truth.
#[derive(Clone)]
pub struct ProblemInstance {
    name: String,
    space: NormSpace,
    constants: InstanceConstants,
    x_star: DVector<f64>,
    hessian_at_opt: DMatrix<f64>,
    noise_cov_at_opt: DMatrix<f64>,
    sampler: Arc<DrawFn>,
    pop_grad: Arc<PopGradFn>,
    quadratic: bool,
    worst_directions: Vec<DVector<f64>>,
    quad_pair: Option<Arc<QuadPairFn>>,
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl ProblemInstance {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        name: impl Into<String>,
        space: NormSpace,
        constants: InstanceConstants,
        x_star: DVector<f64>,
        hessian_at_opt: DMatrix<f64>,
        noise_cov_at_opt: DMatrix<f64>,
        sampler: Arc<DrawFn>,
        pop_grad: Arc<PopGradFn>,
        quadratic: bool,
        worst_directions: Vec<DVector<f64>>,
        quad_pair: Option<Arc<QuadPairFn>>,
    ) -> Result<Self> {
        let dim = space.dim();
        Error::check_dim(dim, x_star.len())?;
        Error::check_dim(dim, hessian_at_opt.nrows())?;
        Error::check_dim(dim, noise_cov_at_opt.nrows())?;
        constants.validate(quadratic)?;
        Cholesky::new(hessian_at_opt.clone()).ok_or(Error::NotPositiveDefinite)?;
        let stationarity = pop_grad(&x_star).norm();
        if stationarity > 1e-9 {
            return Err(Error::PopulationSolveFailed { grad_norm: stationarity, tol: 1e-9 });
        }
        Ok(Self {
            name: name.into(),
            space,
            constants,
            x_star,
            hessian_at_opt,
            noise_cov_at_opt,
            sampler,
            pop_grad,
            quadratic,
            worst_directions,
            quad_pair,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &NormSpace {
        &self.space
    }

    pub fn constants(&self) -> &InstanceConstants {
        &self.constants
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn hessian_at_opt(&self) -> &DMatrix<f64> {
        &self.hessian_at_opt
    }

    pub fn noise_cov_at_opt(&self) -> &DMatrix<f64> {
        &self.noise_cov_at_opt
    }

    pub fn is_quadratic(&self) -> bool {
        self.quadratic
    }

    /// Known adversarial directions for the multiplicative-noise check.
    pub fn worst_directions(&self) -> &[DVector<f64>] {
        &self.worst_directions
    }

    /// Draws one sample `z`, returned as the callable gradient `∇f(·, z)`.
    pub fn draw(&self, stream: &mut SampleStream) -> SampleGrad {
        (self.sampler)(stream)
    }

    /// Convenience for a single evaluation: draws a fresh `z` and returns
    /// `∇f(x, z)`.
    pub fn sample_grad(&self, x: &DVector<f64>, stream: &mut SampleStream) -> DVector<f64> {
        self.draw(stream).eval(x)
    }

    /// Population gradient `∇F(x)`.
    pub fn pop_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.pop_grad)(x)
    }

    /// Draws the raw quadratic sample pair `(Ã, b̃)` when the instance is
    /// defined through one (used by closed-form SAA).
    pub fn draw_quadratic_pair(&self, stream: &mut SampleStream) -> Option<(DMatrix<f64>, DVector<f64>)> {
        self.quad_pair.as_ref().map(|f| f(stream))
    }

    pub fn has_quadratic_pairs(&self) -> bool {
        self.quad_pair.is_some()
    }

    /// `E‖A⁻¹∇f(x*,z)‖²` in the instance norm, i.e. `tr(A⁻¹ Q A⁻¹ Σ)`; equals
    /// `tr(A⁻¹ΣA⁻¹)` in the Euclidean case. This is the statistical floor the
    /// epoch schedules target.
    pub fn tr_lambda(&self) -> f64 {
        let chol = Cholesky::new(self.hessian_at_opt.clone()).expect("hessian validated at construction");
        let w = chol.solve(&chol.solve(self.space.q()).transpose());
        w.component_mul(&self.noise_cov_at_opt).sum()
    }

    /// A clone whose sampler increments `counter` on every draw, for ledger
    /// audits. Quadratic pair draws are counted as one sample each.
    pub fn with_counter(&self, counter: Arc<AtomicU64>) -> Self {
        let mut counted = self.clone();
        let inner = Arc::clone(&self.sampler);
        let c = Arc::clone(&counter);
        counted.sampler = Arc::new(move |stream: &mut SampleStream| {
            c.fetch_add(1, Ordering::Relaxed);
            inner(stream)
        });
        if let Some(pairs) = &self.quad_pair {
            let inner = Arc::clone(pairs);
            counted.quad_pair = Some(Arc::new(move |stream: &mut SampleStream| {
                counter.fetch_add(1, Ordering::Relaxed);
                inner(stream)
            }));
        }
        counted
    }
}

/// Noise model for stochastic quadratic instances: a symmetric multiplicative
/// perturbation of the Hessian plus additive Gaussian noise on the linear
/// term. The additive covariance must be positive definite or exactly zero.
#[derive(Clone, Debug)]
pub enum QuadraticNoise {
    /// Noiseless oracle: every sample returns the population gradient.
    None,
    /// `Ã = A + z·M` with `z = ±scale` equiprobable and fixed symmetric `M`;
    /// `b̃ = b + η`, `η ~ N(0, additive_cov)`.
    RademacherScaled {
        scale: f64,
        matrix: DMatrix<f64>,
        additive_cov: DMatrix<f64>,
    },
    /// `Ã = A + W` with `W` symmetric, independent `N(0, entry_std²)` entries
    /// on and above the diagonal; `b̃ = b + η`.
    GaussianSymmetric { entry_std: f64, additive_cov: DMatrix<f64> },
}

impl QuadraticNoise {
    fn additive_cov(&self, dim: usize) -> DMatrix<f64> {
        match self {
            QuadraticNoise::None => DMatrix::zeros(dim, dim),
            QuadraticNoise::RademacherScaled { additive_cov, .. }
            | QuadraticNoise::GaussianSymmetric { additive_cov, .. } => additive_cov.clone(),
        }
    }

    /// Covariance of the multiplicative part `(Ã−A)x` at a fixed point.
    fn multiplicative_cov(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let dim = x.len();
        match self {
            QuadraticNoise::None => DMatrix::zeros(dim, dim),
            QuadraticNoise::RademacherScaled { scale, matrix, .. } => {
                let mx = matrix * x;
                &mx * mx.transpose() * (scale * scale)
            }
            QuadraticNoise::GaussianSymmetric { entry_std, .. } => {
                let s2 = entry_std * entry_std;
                let mut cov = x * x.transpose() * s2;
                let norm_sq = x.norm_squared();
                for i in 0..dim {
                    cov[(i, i)] = s2 * norm_sq;
                }
                cov
            }
        }
    }

    /// `sup_{‖v‖_Q = 1} E‖(Ã−A)v‖_*²`, the exact multiplicative-noise modulus
    /// for this descriptor in the given geometry.
    fn zeta_sq(&self, space: &NormSpace) -> f64 {
        match self {
            QuadraticNoise::None => 0.0,
            QuadraticNoise::RademacherScaled { scale, matrix, .. } => {
                // E‖zMv‖_*² = scale²·vᵀ M Q⁻¹ M v
                let mut m_qinv_m = DMatrix::zeros(matrix.nrows(), matrix.ncols());
                for j in 0..matrix.ncols() {
                    let col = space.solve(&matrix.column(j).into_owned());
                    m_qinv_m.set_column(j, &col);
                }
                let m_qinv_m = matrix * m_qinv_m;
                scale * scale * generalized_eig_extremes(&m_qinv_m, space).1
            }
            QuadraticNoise::GaussianSymmetric { entry_std, .. } => {
                // E[W B W] = s²(B + diag(tr B − B_ii)) for symmetric B = Q⁻¹
                let dim = space.dim();
                let mut b = DMatrix::zeros(dim, dim);
                for j in 0..dim {
                    let mut e = DVector::zeros(dim);
                    e[j] = 1.0;
                    b.set_column(j, &space.solve(&e));
                }
                let tr = b.trace();
                let mut ewbw = b.clone();
                for i in 0..dim {
                    ewbw[(i, i)] += tr - b[(i, i)];
                }
                ewbw *= entry_std * entry_std;
                generalized_eig_extremes(&ewbw, space).1
            }
        }
    }

    /// Top generalized eigendirection of the multiplicative modulus, used as
    /// the adversarial hook for the noise check. `None` when the ratio is
    /// direction-independent.
    fn worst_direction(&self, space: &NormSpace) -> Option<DVector<f64>> {
        match self {
            QuadraticNoise::RademacherScaled { matrix, .. } => {
                let mut m_qinv_m = DMatrix::zeros(matrix.nrows(), matrix.ncols());
                for j in 0..matrix.ncols() {
                    let col = space.solve(&matrix.column(j).into_owned());
                    m_qinv_m.set_column(j, &col);
                }
                let m_qinv_m = matrix * m_qinv_m;
                Some(generalized_top_eigvec(&m_qinv_m, space))
            }
            _ => None,
        }
    }
}

/// Extreme generalized eigenvalues of `(M, Q)`: eigenvalues of
/// `L⁻¹ M L⁻ᵀ` with `Q = LLᵀ`.
fn generalized_eig_extremes(m: &DMatrix<f64>, space: &NormSpace) -> (f64, f64) {
    let t = whiten(m, space);
    let eig = SymmetricEigen::new(t);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn generalized_top_eigvec(m: &DMatrix<f64>, space: &NormSpace) -> DVector<f64> {
    let t = whiten(m, space);
    let eig = SymmetricEigen::new(t);
    let mut top = 0;
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[top] {
            top = i;
        }
    }
    let w = eig.eigenvectors.column(top).into_owned();
    // map back from whitened coordinates: u = L⁻ᵀ w, then normalize in Q
    let l = space.factor();
    let u = l
        .transpose()
        .solve_upper_triangular(&w)
        .expect("Cholesky factor is invertible");
    let n = space.norm(&u);
    u / n
}

fn whiten(m: &DMatrix<f64>, space: &NormSpace) -> DMatrix<f64> {
    let l = space.factor();
    let x = l.solve_lower_triangular(m).expect("Cholesky factor is invertible");
    let t = l
        .solve_lower_triangular(&x.transpose())
        .expect("Cholesky factor is invertible");
    (&t + t.transpose()) * 0.5
}

fn sample_gaussian(factor: &DMatrix<f64>, stream: &mut SampleStream) -> DVector<f64> {
    let g = DVector::from_fn(factor.nrows(), |_, _| stream.sample::<f64, _>(StandardNormal));
    factor * g
}

/// Stochastic quadratic `F(x) = ½xᵀAx + bᵀx` observed through noisy pairs
/// `(Ã, b̃)` with `E[Ã] = A`, `E[b̃] = b`. The minimizer is `−A⁻¹b` and all
/// constants are derived exactly for the chosen norm.
pub fn general_quadratic(
    a: DMatrix<f64>,
    b: DVector<f64>,
    noise: QuadraticNoise,
    space: NormSpace,
) -> Result<ProblemInstance> {
    let dim = space.dim();
    Error::check_dim(dim, a.nrows())?;
    Error::check_dim(dim, a.ncols())?;
    Error::check_dim(dim, b.len())?;
    let chol = Cholesky::new(a.clone()).ok_or(Error::NotPositiveDefinite)?;
    if let QuadraticNoise::RademacherScaled { matrix, .. } = &noise {
        Error::check_dim(dim, matrix.nrows())?;
        Error::check_dim(dim, matrix.ncols())?;
        if (matrix - matrix.transpose()).norm() > 1e-10 {
            return Err(Error::InvalidParameter("multiplicative perturbation matrix must be symmetric".into()));
        }
    }

    let x_star = -chol.solve(&b);
    let additive_cov = noise.additive_cov(dim);
    if (&additive_cov - additive_cov.transpose()).norm() > 1e-10 {
        return Err(Error::InvalidParameter("additive covariance must be symmetric".into()));
    }
    let additive_factor: Option<DMatrix<f64>> = if additive_cov.iter().all(|&v| v == 0.0) {
        None
    } else {
        Some(Cholesky::new(additive_cov.clone()).ok_or(Error::NotPositiveDefinite)?.l())
    };

    let sigma = noise.multiplicative_cov(&x_star) + &additive_cov;
    let (mu, l) = generalized_eig_extremes(&a, &space);
    let constants = InstanceConstants {
        mu,
        l,
        zeta: noise.zeta_sq(&space).sqrt(),
        l_h: 0.0,
        omega: mu,
        sigma1: None,
        sigma2: None,
    };
    let worst = noise.worst_direction(&space).into_iter().collect();

    let a_arc = Arc::new(a.clone());
    let b_arc = Arc::new(b.clone());
    let noise_arc = Arc::new(noise);
    let factor_arc = Arc::new(additive_factor);

    // each draw materializes the realized pair (Ã, b̃) once, so repeated
    // evaluations of the same sample are a single matvec
    let sampler: Arc<DrawFn> = {
        let (a, b, noise, factor) = (a_arc.clone(), b_arc.clone(), noise_arc.clone(), factor_arc.clone());
        Arc::new(move |stream: &mut SampleStream| {
            let mut b_i = (*b).clone();
            if let Some(f) = factor.as_ref() {
                b_i += sample_gaussian(f, stream);
            }
            let a_i = match noise.as_ref() {
                QuadraticNoise::None => None,
                QuadraticNoise::RademacherScaled { scale, matrix, .. } => {
                    let z = if stream.random::<bool>() { *scale } else { -*scale };
                    Some(&*a + matrix * z)
                }
                QuadraticNoise::GaussianSymmetric { entry_std, .. } => {
                    Some(&*a + symmetric_gaussian(a.nrows(), *entry_std, stream))
                }
            };
            let a = Arc::clone(&a);
            SampleGrad::new(move |x| match &a_i {
                Some(a_i) => a_i * x + &b_i,
                None => &*a * x + &b_i,
            })
        })
    };

    let quad_pair: Arc<QuadPairFn> = {
        let (a, b, noise, factor) = (a_arc.clone(), b_arc.clone(), noise_arc, factor_arc);
        Arc::new(move |stream: &mut SampleStream| {
            let mut b_i = (*b).clone();
            if let Some(f) = factor.as_ref() {
                b_i += sample_gaussian(f, stream);
            }
            let a_i = match noise.as_ref() {
                QuadraticNoise::None => (*a).clone(),
                QuadraticNoise::RademacherScaled { scale, matrix, .. } => {
                    let z = if stream.random::<bool>() { *scale } else { -*scale };
                    &*a + matrix * z
                }
                QuadraticNoise::GaussianSymmetric { entry_std, .. } => {
                    &*a + symmetric_gaussian(a.nrows(), *entry_std, stream)
                }
            };
            (a_i, b_i)
        })
    };

    let pop_grad: Arc<PopGradFn> = Arc::new(move |x: &DVector<f64>| &*a_arc * x + &*b_arc);

    ProblemInstance::assemble(
        "general-quadratic",
        space,
        constants,
        x_star,
        a,
        sigma,
        sampler,
        pop_grad,
        true,
        worst,
        Some(quad_pair),
    )
}

fn symmetric_gaussian(dim: usize, std: f64, stream: &mut SampleStream) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = std * stream.sample::<f64, _>(StandardNormal);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}

/// The two-dimensional quadratic family with condition number `ζ²` and
/// skew-aligned multiplicative noise. For every `ζ ≥ 1` the minimizer is
/// `(1,1)` and the optimal covariance is the identity, which makes the family
/// the canonical stress test for ζ-independence of the rescaled error.
pub fn zeta_family(zeta: f64) -> Result<ProblemInstance> {
    if !(zeta >= 1.0) {
        return Err(Error::InvalidParameter(format!("zeta must be at least 1, got {zeta}")));
    }
    let z2 = zeta * zeta;
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![z2, 1.0]));
    let b = DVector::from_vec(vec![-z2, -1.0]);
    let noise = QuadraticNoise::RademacherScaled {
        scale: zeta,
        matrix: DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]),
        additive_cov: DMatrix::from_diagonal(&DVector::from_vec(vec![z2 * z2, 1.0])),
    };
    let mut inst = general_quadratic(a, b, noise, NormSpace::euclidean(2))?;
    inst.name = "zeta-family".into();
    debug_assert!((inst.constants.mu - 1.0).abs() < 1e-9);
    debug_assert!((inst.constants.l - z2).abs() < 1e-9 * z2);
    debug_assert!((inst.constants.zeta - 2.0 * zeta).abs() < 1e-9 * zeta);
    Ok(inst)
}

/// One-dimensional quadratic with independent Gaussian noise on both the
/// curvature and the linear term. Its sample-average estimator has infinite
/// mean squared error at every sample size, which is what the SAA blow-up
/// experiments measure.
pub fn saa_failure_1d() -> Result<ProblemInstance> {
    let a = DMatrix::from_element(1, 1, 1.0);
    let b = DVector::from_element(1, -1.0);
    let noise = QuadraticNoise::GaussianSymmetric {
        entry_std: 1.0,
        additive_cov: DMatrix::from_element(1, 1, 1.0),
    };
    let mut inst = general_quadratic(a, b, noise, NormSpace::euclidean(1))?;
    inst.name = "saa-failure-1d".into();
    Ok(inst)
}

/// Streaming least squares with Gaussian design `ξ ~ N(0, H)` and independent
/// observation noise, measured in the `H`-norm so that `μ = L = 1`. The
/// multiplicative-noise constant is the statistical condition number `κ̃`,
/// estimated by Monte Carlo when not supplied.
pub fn least_squares(
    dim: usize,
    h: DMatrix<f64>,
    noise_std: f64,
    x_true: DVector<f64>,
    kappa_tilde: Option<f64>,
) -> Result<ProblemInstance> {
    Error::check_dim(dim, h.nrows())?;
    Error::check_dim(dim, h.ncols())?;
    Error::check_dim(dim, x_true.len())?;
    if noise_std < 0.0 {
        return Err(Error::InvalidParameter("noise_std must be nonnegative".into()));
    }
    let space = NormSpace::new(h.clone())?;
    let design_factor = Arc::new(space.factor());

    let kappa = match kappa_tilde {
        Some(k) => {
            if !(k > 0.0) {
                return Err(Error::InvalidParameter("kappa_tilde must be positive".into()));
            }
            k
        }
        None => {
            // moment-matrix estimate on an internal stream; for Gaussian
            // designs the population value is dim + 2 exactly
            let mut stream = crate::rng::stream_from_seed(0x6b61_7070_6131);
            estimate_kappa_tilde(dim, 1_000_000, &mut stream)
        }
    };

    let sigma = &h * (noise_std * noise_std);
    let constants = InstanceConstants {
        mu: 1.0,
        l: 1.0,
        zeta: kappa.sqrt(),
        l_h: 0.0,
        omega: 1.0,
        sigma1: None,
        sigma2: None,
    };

    let x_true_arc = Arc::new(x_true.clone());
    let sampler: Arc<DrawFn> = {
        let (factor, x_true) = (design_factor.clone(), x_true_arc.clone());
        Arc::new(move |stream: &mut SampleStream| {
            let xi = sample_gaussian(&factor, stream);
            let y = x_true.dot(&xi) + noise_std * stream.sample::<f64, _>(StandardNormal);
            SampleGrad::new(move |x| &xi * (x.dot(&xi) - y))
        })
    };
    let quad_pair: Arc<QuadPairFn> = {
        let (factor, x_true) = (design_factor, x_true_arc.clone());
        Arc::new(move |stream: &mut SampleStream| {
            let xi = sample_gaussian(&factor, stream);
            let y = x_true.dot(&xi) + noise_std * stream.sample::<f64, _>(StandardNormal);
            (&xi * xi.transpose(), &xi * (-y))
        })
    };
    let pop_grad: Arc<PopGradFn> = {
        let h = h.clone();
        let x_true = x_true_arc;
        Arc::new(move |x: &DVector<f64>| &h * (x - &*x_true))
    };

    ProblemInstance::assemble(
        "least-squares",
        space,
        constants,
        x_true,
        h,
        sigma,
        sampler,
        pop_grad,
        true,
        Vec::new(),
        Some(quad_pair),
    )
}

/// Monte-Carlo estimate of the statistical condition number for a Gaussian
/// design: the largest eigenvalue of `E[‖g‖² g gᵀ]` over standard normal `g`,
/// which is invariant to the design covariance.
pub fn estimate_kappa_tilde(dim: usize, draws: usize, stream: &mut SampleStream) -> f64 {
    let mut moment = DMatrix::<f64>::zeros(dim, dim);
    let mut g = DVector::<f64>::zeros(dim);
    for _ in 0..draws {
        for v in g.iter_mut() {
            *v = stream.sample::<f64, _>(StandardNormal);
        }
        let w = g.norm_squared();
        for i in 0..dim {
            for j in i..dim {
                moment[(i, j)] += w * g[i] * g[j];
            }
        }
    }
    for i in 0..dim {
        for j in i + 1..dim {
            moment[(j, i)] = moment[(i, j)];
        }
    }
    moment /= draws as f64;
    SymmetricEigen::new(moment).eigenvalues.max()
}
