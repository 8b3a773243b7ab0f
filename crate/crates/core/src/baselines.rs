//! Comparison methods: vanilla stochastic approximation with constant or
//! polynomially decaying stepsizes, Polyak-Ruppert full/tail iterate
//! averaging, and the closed-form sample-average estimator for quadratics.
//! Divergence is data here, not failure: blown-up runs are returned with a
//! flag so sweeps can tabulate divergence rates.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::inner_sgd::DIVERGENCE_FACTOR;
use crate::problems::ProblemInstance;
use crate::rng::SampleStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    None,
    Full,
    Tail,
}

/// Stochastic-approximation run configuration with stepsizes
/// `η_k = η₀·k^{−β}`; `β = 0` is the constant-stepsize case.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SaConfig {
    pub eta0: f64,
    pub beta: f64,
    pub steps: usize,
    pub averaging: Averaging,
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0) {
            return Err(Error::InvalidParameter(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!("beta must lie in [0,1], got {}", self.beta)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one stochastic-approximation run. `estimate` is the configured
/// output (last iterate or average); a diverged run keeps the flag set and
/// the estimate unusable for error statistics.
#[derive(Clone, Debug)]
pub struct SaOutcome {
    pub estimate: DVector<f64>,
    pub last_iterate: DVector<f64>,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
    pub samples_used: usize,
}

/// Runs `x_{k+1} = x_k − η_k ∇f(x_k, z_k)` for `k = 1..=n` from `x1`,
/// maintaining running full and tail averages of the post-step iterates
/// `x_2..x_{n+1}` in O(dim) memory.
pub fn vanilla_sa(instance: &ProblemInstance, cfg: &SaConfig, x1: &DVector<f64>, stream: &mut SampleStream) -> SaOutcome {
    cfg.validate().expect("caller validates the configuration");
    let n = cfg.steps;
    let guard = DIVERGENCE_FACTOR * (1.0 + x1.norm());
    let tail_from = n.div_ceil(2); // position ⌈n/2⌉ in the trajectory, 1-based

    let mut x = x1.clone();
    let mut full_sum = DVector::zeros(x.len());
    let mut tail_sum = DVector::zeros(x.len());
    let mut tail_count = 0usize;
    for k in 1..=n {
        let eta = cfg.eta0 * (k as f64).powf(-cfg.beta);
        let g = instance.sample_grad(&x, stream);
        x -= g * eta;
        if !x.iter().all(|v| v.is_finite()) || x.norm() > guard {
            return SaOutcome {
                estimate: x1.clone(),
                last_iterate: x1.clone(),
                diverged: true,
                diverged_at: Some(k),
                samples_used: k,
            };
        }
        full_sum += &x;
        if k >= tail_from {
            tail_sum += &x;
            tail_count += 1;
        }
    }
    let estimate = match cfg.averaging {
        Averaging::None => x.clone(),
        Averaging::Full => full_sum / n as f64,
        Averaging::Tail => tail_sum / tail_count as f64,
    };
    SaOutcome {
        estimate,
        last_iterate: x,
        diverged: false,
        diverged_at: None,
        samples_used: n,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AverageMode {
    Full,
    Tail,
}

/// Offline Polyak-Ruppert average of a stored trajectory `x_1..x_n`:
/// the full mean, or the mean of the tail positions `⌈n/2⌉..n`.
///
/// The tail divides by the actual number of included terms
/// `n − ⌈n/2⌉ + 1`, which for even `n` differs by one from the
/// conventionally quoted `⌊n/2⌋` divisor; a true average is the only
/// self-consistent choice and the asymptotics are unaffected.
pub fn rpj_average(trajectory: &[DVector<f64>], mode: AverageMode) -> Result<DVector<f64>> {
    if trajectory.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = trajectory.len();
    let from = match mode {
        AverageMode::Full => 1,
        AverageMode::Tail => n.div_ceil(2),
    };
    let included = &trajectory[from - 1..];
    let mut sum = DVector::zeros(trajectory[0].len());
    for x in included {
        sum += x;
    }
    Ok(sum / included.len() as f64)
}

/// Sample-average estimate for stochastic quadratics.
#[derive(Clone, Debug)]
pub enum SaaOutcome {
    Estimate(DVector<f64>),
    /// The averaged curvature matrix had a non-positive eigenvalue, so the
    /// empirical objective has no finite minimizer.
    Degenerate,
}

/// Closed-form sample-average approximation: averages the pairs `(A_i, b_i)`
/// and returns `−Ā⁻¹b̄` when `Ā` is positive definite, the degenerate flag
/// otherwise.
pub fn saa_quadratic(samples: &[(DMatrix<f64>, DVector<f64>)]) -> Result<SaaOutcome> {
    let Some((first_a, first_b)) = samples.first() else {
        return Err(Error::EmptySamples);
    };
    let dim = first_b.len();
    Error::check_dim(dim, first_a.nrows())?;
    let mut a_bar = DMatrix::zeros(dim, dim);
    let mut b_bar = DVector::zeros(dim);
    for (a, b) in samples {
        Error::check_dim(dim, a.nrows())?;
        Error::check_dim(dim, a.ncols())?;
        Error::check_dim(dim, b.len())?;
        a_bar += a;
        b_bar += b;
    }
    a_bar /= samples.len() as f64;
    b_bar /= samples.len() as f64;
    let a_bar = (&a_bar + a_bar.transpose()) * 0.5;
    match Cholesky::new(a_bar) {
        Some(chol) => Ok(SaaOutcome::Estimate(-chol.solve(&b_bar))),
        None => Ok(SaaOutcome::Degenerate),
    }
}

/// Mean of `min(|x̂ − x*|, cap)²` over the given absolute errors. The
/// truncation makes a finite summary of an infinite-mean error law; the
/// statistic is non-decreasing in the cap by construction.
pub fn truncated_mse(abs_errors: &[f64], cap: f64) -> f64 {
    if abs_errors.is_empty() {
        return 0.0;
    }
    abs_errors.iter().map(|e| e.min(cap).powi(2)).sum::<f64>() / abs_errors.len() as f64
}
