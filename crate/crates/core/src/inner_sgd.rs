//! Plain stochastic-gradient inner loop with weighted-average output, run in
//! the geometry of a [`NormSpace`]. Each step consumes exactly one oracle
//! draw, so an invocation with `T` update steps uses `T + 1` samples.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::normspace::NormSpace;
use crate::rng::SampleStream;

/// Iterates are declared diverged once their norm exceeds
/// `DIVERGENCE_FACTOR · (1 + ‖x₀‖)`.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Configuration of the inner stochastic-gradient loop.
///
/// `weights` has length `steps + 2` and weighs the iterates `x_0 .. x_{T+1}`;
/// the output is the normalized weighted average.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SgdConfig {
    pub eta: f64,
    pub steps: usize,
    pub weights: Vec<f64>,
}

impl SgdConfig {
    /// Uniform averaging of `x_1 .. x_{T+1}` with zero weight on the start
    /// point, the configuration under which the one-sixteenth contraction
    /// guarantee holds.
    pub fn theory(eta: f64, steps: usize) -> Self {
        let mut weights = vec![1.0 / (steps as f64 + 1.0); steps + 2];
        weights[0] = 0.0;
        Self { eta, steps, weights }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        if self.weights.len() != self.steps + 2 {
            return Err(Error::InvalidParameter(format!(
                "weights must have length steps + 2 = {}, got {}",
                self.steps + 2,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be nonnegative and finite".into()));
        }
        if self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter("weights must have positive sum".into()));
        }
        Ok(())
    }

    /// Oracle draws consumed by one invocation.
    pub fn samples(&self) -> usize {
        self.steps + 1
    }
}

/// Runs `x_{t+1} = x_t − η Q⁻¹ g(x_t)` for `t = 0..=T` from `x_tilde` and
/// returns the weighted average of the trajectory.
///
/// The oracle receives the query point and the stream; for variance-reduced
/// epochs it is the control-variate gradient of the current epoch, but any
/// unbiased oracle works. Divergence aborts with the last finite iterate and
/// the step index attached.
pub fn sgd_inner(
    grad_oracle: &mut dyn FnMut(&DVector<f64>, &mut SampleStream) -> DVector<f64>,
    x_tilde: &DVector<f64>,
    cfg: &SgdConfig,
    space: &NormSpace,
    stream: &mut SampleStream,
) -> Result<DVector<f64>> {
    cfg.validate()?;
    Error::check_dim(space.dim(), x_tilde.len())?;
    let guard = DIVERGENCE_FACTOR * (1.0 + space.norm(x_tilde));

    let mut x = x_tilde.clone();
    let mut acc = x_tilde * cfg.weights[0];
    for t in 0..=cfg.steps {
        let g = grad_oracle(&x, stream);
        let next = space.gradient_step(&x, &g, cfg.eta)?;
        if !next.iter().all(|v| v.is_finite()) || space.norm(&next) > guard {
            return Err(Error::Diverged {
                step: t,
                epoch: None,
                last_finite: x,
            });
        }
        x = next;
        acc += &x * cfg.weights[t + 1];
    }
    Ok(acc / cfg.weights.iter().sum::<f64>())
}
