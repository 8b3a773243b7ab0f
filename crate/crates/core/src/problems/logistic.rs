//! Ridge-regularized logistic regression with Gaussian features. The
//! population gradient and Hessian reduce to one-dimensional Gaussian
//! integrals through the Stein identity `E[h(ξ)ξ] = C·E[∇h(ξ)]`, which are
//! evaluated with Gauss-Hermite quadrature; the minimizer is then located by
//! a damped Newton iteration at construction. The gradient-noise covariance
//! at the optimum integrates the label analytically and averages the feature
//! part over a long frozen stream.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::normspace::NormSpace;
use crate::rng::{stream_from_seed, SampleStream};

use super::{InstanceConstants, ProblemInstance, SampleGrad};

const GH_NODES: usize = 96;
const SIGMA_MC_DRAWS: usize = 2_000_000;
const SIGMA_MC_SEED: u64 = 0x6c6f_6769_7374;
const GRAD_TOL: f64 = 1e-10;
/// Tolerance the returned minimizer must certify.
pub const STATIONARITY_TOL: f64 = 1e-8;

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_prime(t: f64) -> f64 {
    let s = sigmoid(t);
    s * (1.0 - s)
}

fn sigmoid_third(t: f64) -> f64 {
    let s = sigmoid(t);
    s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s)
}

/// Gauss-Hermite nodes and weights for `∫ e^{-t²} f(t) dt`, from the
/// eigendecomposition of the Jacobi matrix.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let off = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let weight = std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, i)].powi(2);
            (eig.eigenvalues[i], weight)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Quadrature table for expectations of smooth functions of `N(0, v)`.
struct GaussExpect {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussExpect {
    fn new() -> Self {
        let (nodes, weights) = gauss_hermite(GH_NODES);
        Self { nodes, weights }
    }

    /// `E[f(s)]` for `s ~ N(0, variance)`.
    fn expect(&self, variance: f64, f: impl Fn(f64) -> f64) -> f64 {
        if variance <= 0.0 {
            return f(0.0);
        }
        let scale = (2.0 * variance).sqrt();
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(scale * t))
            .sum::<f64>()
            * inv_sqrt_pi
    }
}

struct PopulationCalculus {
    cov: DMatrix<f64>,
    x_true: DVector<f64>,
    lambda: f64,
    quad: GaussExpect,
}

impl PopulationCalculus {
    /// `∇F(x) = C(E[σ'(s_x)]·x − E[σ'(s_t)]·x_true) + λx` with
    /// `s_x ~ N(0, xᵀCx)`, `s_t ~ N(0, x_trueᵀCx_true)`.
    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let v_x = x.dot(&(&self.cov * x)).max(0.0);
        let v_t = self.x_true.dot(&(&self.cov * &self.x_true)).max(0.0);
        let c_x = self.quad.expect(v_x, sigmoid_prime);
        let c_t = self.quad.expect(v_t, sigmoid_prime);
        &self.cov * (x * c_x - &self.x_true * c_t) + x * self.lambda
    }

    /// `∇²F(x) = λI + E[σ'(s_x)]·C + E[σ'''(s_x)]·(Cx)(Cx)ᵀ`.
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let dim = x.len();
        let v_x = x.dot(&(&self.cov * x)).max(0.0);
        let c1 = self.quad.expect(v_x, sigmoid_prime);
        let c3 = self.quad.expect(v_x, sigmoid_third);
        let cx = &self.cov * x;
        &self.cov * c1 + &cx * cx.transpose() * c3 + DMatrix::identity(dim, dim) * self.lambda
    }

    /// Damped Newton on the population gradient.
    fn minimize(&self, start: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = start.clone();
        let mut grad_norm = self.grad(&x).norm();
        for _ in 0..200 {
            if grad_norm <= GRAD_TOL {
                return Ok(x);
            }
            let g = self.grad(&x);
            let h = self.hessian(&x);
            let step = Cholesky::new(h).ok_or(Error::NotPositiveDefinite)?.solve(&g);
            let mut t = 1.0;
            loop {
                let cand = &x - &step * t;
                let cand_norm = self.grad(&cand).norm();
                if cand_norm < grad_norm || t < 1e-8 {
                    x = cand;
                    grad_norm = cand_norm;
                    break;
                }
                t *= 0.5;
            }
        }
        if grad_norm <= STATIONARITY_TOL {
            Ok(x)
        } else {
            Err(Error::PopulationSolveFailed { grad_norm, tol: STATIONARITY_TOL })
        }
    }
}

/// Ridge-regularized logistic regression: features `ξ ~ N(0, feature_cov)`,
/// labels `y ~ Bernoulli(sigmoid(⟨x_true, ξ⟩))`, sample gradient
/// `(sigmoid(⟨x,ξ⟩) − y)ξ + λx`.
///
/// Constants use the standard sub-Gaussian calculus with the universal
/// constant set to one; see [`logistic_glm_with_constant`] to change it.
pub fn logistic_glm(
    dim: usize,
    lambda: f64,
    x_true: DVector<f64>,
    feature_cov: DMatrix<f64>,
) -> Result<ProblemInstance> {
    logistic_glm_with_constant(dim, lambda, x_true, feature_cov, 1.0)
}

/// [`logistic_glm`] with an explicit universal constant scaling the derived
/// `L_H`, `ζ²`, `σ₁`, `σ₂`.
pub fn logistic_glm_with_constant(
    dim: usize,
    lambda: f64,
    x_true: DVector<f64>,
    feature_cov: DMatrix<f64>,
    universal_constant: f64,
) -> Result<ProblemInstance> {
    Error::check_dim(dim, x_true.len())?;
    Error::check_dim(dim, feature_cov.nrows())?;
    Error::check_dim(dim, feature_cov.ncols())?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if !(universal_constant > 0.0) {
        return Err(Error::InvalidParameter("universal constant must be positive".into()));
    }
    let feature_space = NormSpace::new(feature_cov.clone())?; // validates symmetric PD
    let feature_factor = Arc::new(feature_space.factor());

    let calculus = Arc::new(PopulationCalculus {
        cov: feature_cov.clone(),
        x_true: x_true.clone(),
        lambda,
        quad: GaussExpect::new(),
    });
    let x_star = calculus.minimize(&x_true)?;
    let hessian_at_opt = calculus.hessian(&x_star);
    let noise_cov_at_opt = sigma_at_optimum(&feature_factor, &x_star, &x_true, lambda);

    // sub-Gaussian parameters: logistic link has L1 = L2 = 1/4 and a unit
    // feature direction has psi_2 norm at most 2·sqrt(λmax(C)); labels and
    // link values live in [0,1] with psi_2 norm at most 2
    let l1 = 0.25;
    let l2 = 0.25;
    let sub_gauss = 2.0 * SymmetricEigen::new(feature_cov.clone()).eigenvalues.max().sqrt();
    let (sigma_y, sigma_star) = (2.0, 2.0);
    let c = universal_constant;
    let mu = lambda; // gamma = 0: the logistic link is convex but not strongly convex
    let l = l1 * feature_cov.trace() + lambda;
    let l_h = c * l2 * sub_gauss.powi(3) / mu;
    let zeta = (c * l1 * l1 * dim as f64 * sub_gauss.powi(4)).sqrt();
    let sigma1 = c * sub_gauss * (sigma_star + sigma_y);
    let sigma2 = c * l1 * sub_gauss * sub_gauss;
    let omega = SymmetricEigen::new(hessian_at_opt.clone())
        .eigenvalues
        .min()
        .clamp(mu, l);
    let constants = InstanceConstants {
        mu,
        l,
        zeta,
        l_h,
        omega,
        sigma1: Some(sigma1),
        sigma2: Some(sigma2),
    };

    let x_true_arc = Arc::new(x_true);
    let sampler: Arc<super::DrawFn> = {
        let (factor, x_true) = (feature_factor, x_true_arc.clone());
        Arc::new(move |stream: &mut SampleStream| {
            let xi = super::sample_gaussian(&factor, stream);
            let y = if stream.random::<f64>() < sigmoid(x_true.dot(&xi)) { 1.0 } else { 0.0 };
            SampleGrad::new(move |x| &xi * (sigmoid(x.dot(&xi)) - y) + x * lambda)
        })
    };
    let pop_grad: Arc<super::PopGradFn> = {
        let calculus = Arc::clone(&calculus);
        Arc::new(move |x: &DVector<f64>| calculus.grad(x))
    };

    ProblemInstance::assemble(
        "logistic-glm",
        NormSpace::euclidean(dim),
        constants,
        x_star,
        hessian_at_opt,
        noise_cov_at_opt,
        sampler,
        pop_grad,
        false,
        Vec::new(),
        None,
    )
}

/// `Σ = E[w(ξ)·ξξᵀ] − λ²x*x*ᵀ` with the label integrated out:
/// `w(ξ) = (σ(⟨x*,ξ⟩) − σ(⟨x_t,ξ⟩))² + σ(⟨x_t,ξ⟩)(1 − σ(⟨x_t,ξ⟩))`.
fn sigma_at_optimum(
    feature_factor: &DMatrix<f64>,
    x_star: &DVector<f64>,
    x_true: &DVector<f64>,
    lambda: f64,
) -> DMatrix<f64> {
    let dim = x_star.len();
    let mut stream = stream_from_seed(SIGMA_MC_SEED);
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    let mut g = DVector::<f64>::zeros(dim);
    for _ in 0..SIGMA_MC_DRAWS {
        for v in g.iter_mut() {
            *v = stream.sample::<f64, _>(StandardNormal);
        }
        let xi = feature_factor * &g;
        let s_star = sigmoid(x_star.dot(&xi));
        let s_true = sigmoid(x_true.dot(&xi));
        let w = (s_star - s_true).powi(2) + s_true * (1.0 - s_true);
        for i in 0..dim {
            for j in i..dim {
                acc[(i, j)] += w * xi[i] * xi[j];
            }
        }
    }
    acc /= SIGMA_MC_DRAWS as f64;
    for i in 0..dim {
        for j in i + 1..dim {
            acc[(j, i)] = acc[(i, j)];
        }
    }
    acc - x_star * x_star.transpose() * (lambda * lambda)
}
