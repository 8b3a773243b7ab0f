//! Monte-Carlo verification suite: for each instance family it checks
//! stationarity of the known minimizer, unbiasedness of the sampler against
//! the population gradient, the gradient-noise covariance at the optimum,
//! the multiplicative-noise modulus, and (for quadratics) exact affinity of
//! the population gradient. All stochastic checks use three-standard-error
//! bands and are deterministic given the seed.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::metrics;
use crate::problems::{self, ProblemInstance};
use crate::rng::stream_from_seed;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub instance: String,
    pub check: String,
    /// The measured statistic, normalized so that `statistic <= bound` passes.
    pub statistic: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(instance: &str, check: &str, statistic: f64, bound: f64) -> Self {
        Self {
            instance: instance.into(),
            check: check.into(),
            statistic,
            bound,
            pass: statistic <= bound,
        }
    }
}

/// Draw counts used by one instance verification.
#[derive(Clone, Copy, Debug)]
pub struct VerifyBudget {
    pub unbiasedness_points: usize,
    pub unbiasedness_draws: usize,
    pub covariance_draws: usize,
    pub assumption_b_pairs: usize,
    pub assumption_b_draws: usize,
}

impl Default for VerifyBudget {
    fn default() -> Self {
        Self {
            unbiasedness_points: 5,
            unbiasedness_draws: 100_000,
            covariance_draws: 120_000,
            assumption_b_pairs: 20,
            assumption_b_draws: 4_000,
        }
    }
}

/// Runs every applicable check on one instance.
pub fn verify_instance(instance: &ProblemInstance, seed: u64, budget: &VerifyBudget) -> Vec<CheckResult> {
    let name = instance.name().to_string();
    let mut stream = stream_from_seed(seed);
    let mut results = Vec::new();

    // 1. stationarity of the declared minimizer
    let grad_norm = instance.pop_grad(instance.x_star()).norm();
    results.push(CheckResult::new(&name, "stationarity", grad_norm, 1e-8));

    // 2. sampler unbiasedness at random points: ‖mean − ∇F‖ ≤ 3·stderr
    let dim = instance.dim();
    let mut worst = 0.0f64;
    for _ in 0..budget.unbiasedness_points {
        let x = DVector::from_fn(dim, |_, _| 2.0 * stream.sample::<f64, _>(StandardNormal));
        let mut mean = DVector::zeros(dim);
        let mut second = DVector::zeros(dim);
        for _ in 0..budget.unbiasedness_draws {
            let g = instance.sample_grad(&x, &mut stream);
            second += g.component_mul(&g);
            mean += g;
        }
        let m = budget.unbiasedness_draws as f64;
        mean /= m;
        second /= m;
        let se_sq: f64 = (0..dim).map(|i| (second[i] - mean[i] * mean[i]).max(0.0) / m).sum();
        let bias = (mean - instance.pop_grad(&x)).norm();
        let ratio = bias / (3.0 * se_sq.sqrt() + 1e-300);
        worst = worst.max(ratio);
    }
    results.push(CheckResult::new(&name, "unbiasedness", worst, 1.0));

    // 3. covariance at the optimum, block jackknife for the error scale
    let blocks = 10usize;
    let per_block = budget.covariance_draws / blocks;
    let mut block_covs = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let draws: Vec<DVector<f64>> = (0..per_block)
            .map(|_| instance.sample_grad(instance.x_star(), &mut stream))
            .collect();
        block_covs.push(metrics::empirical_rescaled_covariance(&draws).expect("per_block >= 2"));
    }
    let mean_cov = block_covs
        .iter()
        .fold(nalgebra::DMatrix::zeros(dim, dim), |acc, c| acc + c)
        / blocks as f64;
    let block_var = block_covs
        .iter()
        .map(|c| (c - &mean_cov).norm_squared())
        .sum::<f64>()
        / (blocks - 1) as f64;
    let se_scale = (block_var / blocks as f64).sqrt();
    let dist = (&mean_cov - instance.noise_cov_at_opt()).norm();
    results.push(CheckResult::new(&name, "noise-covariance", dist, 5.0 * se_scale));

    // 4. multiplicative-noise modulus
    let report = metrics::verify_assumption_b(
        instance,
        budget.assumption_b_pairs,
        budget.assumption_b_draws,
        &mut stream,
    );
    let max_cell_se = report
        .cells
        .iter()
        .map(|c| c.rel_stderr)
        .fold(0.0f64, f64::max);
    results.push(CheckResult::new(
        &name,
        "noise-lipschitz",
        report.max_ratio,
        report.zeta_sq * (1.0 + 3.0 * max_cell_se) + 1e-12,
    ));

    // 5. quadratics: the population gradient is exactly affine
    if instance.is_quadratic() {
        let x = DVector::from_fn(dim, |_, _| stream.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(dim, |_, _| stream.sample::<f64, _>(StandardNormal));
        let lhs = instance.pop_grad(&x) - instance.pop_grad(&y);
        let rhs = instance.hessian_at_opt() * (&x - &y);
        let resid = (lhs - &rhs).norm();
        results.push(CheckResult::new(&name, "affine-gradient", resid, 1e-12 * (1.0 + rhs.norm())));
    }

    results
}

/// The four instance families the suite covers by default.
pub fn default_instances() -> Result<Vec<ProblemInstance>> {
    Ok(vec![
        problems::zeta_family(2.0)?,
        problems::saa_failure_1d()?,
        problems::least_squares(
            3,
            nalgebra::DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0])),
            1.0,
            DVector::from_vec(vec![1.0, -1.0, 0.5]),
            None,
        )?,
        problems::logistic_glm(3, 0.1, DVector::from_vec(vec![0.5, -0.5, 0.25]), nalgebra::DMatrix::identity(3, 3))?,
    ])
}

/// Verifies one named family, or all of them.
pub fn verify_families(which: Option<&str>, seed: u64) -> Result<Vec<CheckResult>> {
    let budget = VerifyBudget::default();
    let mut out = Vec::new();
    for instance in default_instances()? {
        if let Some(name) = which {
            if instance.name() != name {
                continue;
            }
        }
        out.extend(verify_instance(&instance, seed, &budget));
    }
    if out.is_empty() {
        return Err(crate::error::Error::InvalidConfig {
            field: "instance".into(),
            message: format!("unknown instance family `{}`", which.unwrap_or("")),
        });
    }
    Ok(out)
}

/// Plain-text pass/fail table.
pub fn render_table(results: &[CheckResult]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<18} {:>12} {:>12}  result\n",
        "instance", "check", "statistic", "bound"
    ));
    for r in results {
        out.push_str(&format!(
            "{:<16} {:<18} {:>12.4e} {:>12.4e}  {}\n",
            r.instance,
            r.check,
            r.statistic,
            r.bound,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    out
}
