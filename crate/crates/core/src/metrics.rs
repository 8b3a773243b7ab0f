//! Instance-dependent reference quantities and Monte-Carlo verification of
//! the regularity assumptions: the optimal covariance `Λ = A⁻¹ΣA⁻¹`, the
//! local minimax reference line `tr(Λ)/(4(π²+1)n)`, rescaled-error statistics,
//! and the multiplicative-noise (Assumption B style) ratio check.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::normspace::NormSpace;
use crate::problems::ProblemInstance;
use crate::rng::SampleStream;

/// `Λ = A⁻¹ΣA⁻¹` together with its trace. `tr(Λ)/n` is the target risk for an
/// instance with Hessian `A` and gradient-noise covariance `Σ` at the optimum.
#[derive(Clone, Debug)]
pub struct OptimalCovariance {
    pub lambda: DMatrix<f64>,
    pub trace: f64,
}

/// Computes `Λ = A⁻¹ΣA⁻¹` via two Cholesky solves, symmetrized.
pub fn optimal_covariance(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<OptimalCovariance> {
    Error::check_dim(a.nrows(), a.ncols())?;
    Error::check_dim(a.nrows(), sigma.nrows())?;
    Error::check_dim(a.ncols(), sigma.ncols())?;
    let chol = Cholesky::new(a.clone()).ok_or(Error::NotPositiveDefinite)?;
    let lambda = chol.solve(&chol.solve(sigma).transpose());
    let lambda = (&lambda + lambda.transpose()) * 0.5;
    let trace = lambda.trace();
    Ok(OptimalCovariance { lambda, trace })
}

/// Local minimax reference line `tr(A⁻¹ΣA⁻¹) / (4(π²+1)n)`.
///
/// Used only as a plotted reference; the constant is not expected to be tight
/// at desk scale.
pub fn lower_bound_line(a: &DMatrix<f64>, sigma: &DMatrix<f64>, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let cov = optimal_covariance(a, sigma)?;
    Ok(cov.trace / (4.0 * (std::f64::consts::PI.powi(2) + 1.0) * n as f64))
}

/// Rescaled squared error `n · ‖estimate − x*‖²` in the given norm.
pub fn rescaled_error(estimate: &DVector<f64>, x_star: &DVector<f64>, n: usize, space: &NormSpace) -> f64 {
    n as f64 * space.norm_sq(&(estimate - x_star))
}

/// Sample covariance (divisor `count − 1`) of a set of error vectors
/// `√n(x̂ − x*)`. Fails with fewer than two vectors.
pub fn empirical_rescaled_covariance(errors: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    if errors.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 vectors for a sample covariance, got {}",
            errors.len()
        )));
    }
    let dim = errors[0].len();
    for e in errors {
        Error::check_dim(dim, e.len())?;
    }
    let count = errors.len() as f64;
    let mean = errors.iter().fold(DVector::zeros(dim), |acc, e| acc + e) / count;
    let mut cov = DMatrix::zeros(dim, dim);
    for e in errors {
        let c = e - &mean;
        cov += &c * c.transpose();
    }
    cov /= count - 1.0;
    Ok(cov)
}

/// One pair's contribution to the multiplicative-noise check.
#[derive(Clone, Debug)]
pub struct RatioCell {
    /// `E‖(∇f(x,z)−∇F(x)) − (∇f(x',z)−∇F(x'))‖_*² / ‖x−x'‖²`, Monte-Carlo.
    pub ratio: f64,
    /// Relative standard error of the Monte-Carlo ratio estimate.
    pub rel_stderr: f64,
}

#[derive(Clone, Debug)]
pub struct AssumptionBReport {
    pub cells: Vec<RatioCell>,
    pub max_ratio: f64,
    /// `ζ²` declared by the instance.
    pub zeta_sq: f64,
    /// `max_ratio ≤ ζ² (1 + 3·rel_stderr)` for the maximal cell.
    pub pass: bool,
}

/// Monte-Carlo check that the centered gradient noise is `ζ`-Lipschitz in the
/// query point, measured in the dual norm: samples `pairs` random pairs plus
/// the instance's registered adversarial directions, estimates the ratio for
/// each, and compares the maximum against the declared `ζ²` with a
/// three-standard-error band.
///
/// Deterministic given the stream seed.
pub fn verify_assumption_b(
    instance: &ProblemInstance,
    pairs: usize,
    draws_per_pair: usize,
    stream: &mut SampleStream,
) -> AssumptionBReport {
    let dim = instance.dim();
    let space = instance.space();
    let zeta_sq = instance.constants().zeta.powi(2);

    let mut offsets: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    // adversarial hooks first: known worst directions at unit and long range
    for dir in instance.worst_directions() {
        offsets.push((DVector::zeros(dim), dir.clone()));
        offsets.push((dir.clone() * 0.5, dir * -2.5));
    }
    for _ in 0..pairs {
        let x = random_vector(dim, 2.0, stream);
        let x_prime = random_vector(dim, 2.0, stream);
        if space.norm(&(&x - &x_prime)) > 1e-8 {
            offsets.push((x, x_prime));
        }
    }

    let mut cells = Vec::with_capacity(offsets.len());
    let (mut max_ratio, mut max_rel_se) = (0.0f64, 0.0f64);
    for (x, x_prime) in &offsets {
        let dist_sq = space.norm_sq(&(x - x_prime));
        let pop_x = instance.pop_grad(x);
        let pop_xp = instance.pop_grad(x_prime);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws_per_pair {
            // one shared sample evaluated at both points
            let sample = instance.draw(stream);
            let noise_diff = (sample.eval(x) - &pop_x) - (sample.eval(x_prime) - &pop_xp);
            let v = space.dual_norm_sq(&noise_diff).expect("instance dimensions agree");
            sum += v;
            sum_sq += v * v;
        }
        let m = draws_per_pair as f64;
        let mean = sum / m;
        let var = (sum_sq / m - mean * mean).max(0.0);
        let ratio = mean / dist_sq;
        let rel_stderr = if mean > 0.0 { (var / m).sqrt() / mean } else { 0.0 };
        if ratio > max_ratio {
            max_ratio = ratio;
            max_rel_se = rel_stderr;
        }
        cells.push(RatioCell { ratio, rel_stderr });
    }

    let pass = max_ratio <= zeta_sq * (1.0 + 3.0 * max_rel_se) + 1e-12;
    AssumptionBReport { cells, max_ratio, zeta_sq, pass }
}

fn random_vector(dim: usize, scale: f64, stream: &mut SampleStream) -> DVector<f64> {
    use rand::Rng;
    DVector::from_fn(dim, |_, _| scale * stream.sample::<f64, _>(StandardNormal))
}
