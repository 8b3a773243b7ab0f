//! Accelerated stochastic-gradient inner loop (an AC-SA variant) with
//! time-dependent minibatches and closed-form prox updates in the geometry of
//! a [`NormSpace`]. The growing minibatch schedule is what keeps the loop
//! stable under multiplicative (state-dependent) gradient noise.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::inner_sgd::DIVERGENCE_FACTOR;
use crate::normspace::NormSpace;
use crate::rng::SampleStream;

/// Configuration of the accelerated inner loop.
///
/// The interpolation and prox weights follow the closed forms
/// `α_t = 2/(t+1)` and `γ_t = 8L/(t(t+1))`; the minibatch schedule is
/// `m_t = max(1, ⌈minibatch_coeff · t⌉)`. The prox step uses `mu_alg` on the
/// fresh-gradient term and `mu_tilde` on the memory term; the guarantees take
/// `mu_tilde = μ/2` with `mu_alg = μ`, and both are kept as separate fields.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AsgdConfig {
    pub mu_alg: f64,
    pub mu_tilde: f64,
    pub l: f64,
    pub steps: usize,
    pub minibatch_coeff: f64,
}

impl AsgdConfig {
    /// The configuration under which the one-sixteenth contraction guarantee
    /// holds: `μ̃ = μ/2`, `m_t = ⌈256 ζ² t / (μL)⌉`.
    pub fn theory(mu: f64, l: f64, zeta: f64, steps: usize) -> Self {
        Self {
            mu_alg: mu,
            mu_tilde: mu / 2.0,
            l,
            steps,
            minibatch_coeff: 256.0 * zeta * zeta / (mu * l),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_alg > 0.0) || !(self.mu_tilde > 0.0) {
            return Err(Error::InvalidParameter("mu_alg and mu_tilde must be positive".into()));
        }
        if !(self.l > 0.0) {
            return Err(Error::InvalidParameter("l must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        if !(self.minibatch_coeff >= 0.0) {
            return Err(Error::InvalidParameter("minibatch_coeff must be nonnegative".into()));
        }
        Ok(())
    }

    /// `α_t = 2/(t+1)`; equals one at `t = 1`, in `(0,1)` afterwards.
    pub fn alpha(&self, t: usize) -> f64 {
        2.0 / (t as f64 + 1.0)
    }

    /// `γ_t = 8L/(t(t+1))`.
    pub fn gamma(&self, t: usize) -> f64 {
        8.0 * self.l / (t as f64 * (t as f64 + 1.0))
    }

    /// `m_t`, never below one. Exact integer ceilings keep the sample ledger
    /// exact.
    pub fn minibatch(&self, t: usize) -> usize {
        ((self.minibatch_coeff * t as f64).ceil() as usize).max(1)
    }

    /// Total oracle draws of one invocation: `Σ_{t=1}^{T} m_t`.
    pub fn samples(&self) -> usize {
        (1..=self.steps).map(|t| self.minibatch(t)).sum()
    }
}

/// The interpolation point
/// `r_t = [(1−α)(μ̃+γ)] y / [γ + (1−α²)μ̃] + [α((1−α)μ̃+γ)] x / [γ + (1−α²)μ̃]`.
/// When `α = 1` this is `x_prev` exactly.
pub fn asgd_midpoint(
    y_prev: &DVector<f64>,
    x_prev: &DVector<f64>,
    alpha: f64,
    gamma: f64,
    mu_tilde: f64,
) -> DVector<f64> {
    let denom = gamma + (1.0 - alpha * alpha) * mu_tilde;
    let w_y = (1.0 - alpha) * (mu_tilde + gamma) / denom;
    let w_x = alpha * ((1.0 - alpha) * mu_tilde + gamma) / denom;
    y_prev * w_y + x_prev * w_x
}

/// Closed-form solution of the prox subproblem
/// `argmin_x α[⟨G, x⟩ + (μ/2)‖r−x‖²] + ((1−α)μ̃+γ)/2 · ‖x_prev−x‖²`
/// in the `Q`-norm:
/// `x = [αμ r + ((1−α)μ̃+γ) x_prev − α Q⁻¹G] / (αμ + (1−α)μ̃ + γ)`.
#[allow(clippy::too_many_arguments)]
pub fn asgd_prox(
    r: &DVector<f64>,
    x_prev: &DVector<f64>,
    g: &DVector<f64>,
    alpha: f64,
    gamma: f64,
    mu_alg: f64,
    mu_tilde: f64,
    space: &NormSpace,
) -> Result<DVector<f64>> {
    Error::check_dim(space.dim(), r.len())?;
    Error::check_dim(space.dim(), x_prev.len())?;
    Error::check_dim(space.dim(), g.len())?;
    let memory = (1.0 - alpha) * mu_tilde + gamma;
    let denom = alpha * mu_alg + memory;
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter("prox weights must have positive sum".into()));
    }
    Ok((r * (alpha * mu_alg) + x_prev * memory - space.solve(g) * alpha) / denom)
}

/// Runs the accelerated recursion from `x_tilde` and returns `(y_T, samples)`
/// where `samples = Σ m_t` counts fresh oracle draws.
pub fn asgd_inner(
    grad_oracle: &mut dyn FnMut(&DVector<f64>, &mut SampleStream) -> DVector<f64>,
    x_tilde: &DVector<f64>,
    cfg: &AsgdConfig,
    space: &NormSpace,
    stream: &mut SampleStream,
) -> Result<(DVector<f64>, usize)> {
    cfg.validate()?;
    Error::check_dim(space.dim(), x_tilde.len())?;
    let guard = DIVERGENCE_FACTOR * (1.0 + space.norm(x_tilde));

    let mut x = x_tilde.clone();
    let mut y = x_tilde.clone();
    let mut used = 0usize;
    for t in 1..=cfg.steps {
        let alpha = cfg.alpha(t);
        let gamma = cfg.gamma(t);
        let r = asgd_midpoint(&y, &x, alpha, gamma, cfg.mu_tilde);

        let m = cfg.minibatch(t);
        let mut g_avg = grad_oracle(&r, stream);
        for _ in 1..m {
            g_avg += grad_oracle(&r, stream);
        }
        g_avg /= m as f64;
        used += m;

        x = asgd_prox(&r, &x, &g_avg, alpha, gamma, cfg.mu_alg, cfg.mu_tilde, space)?;
        y = &x * alpha + y * (1.0 - alpha);
        if !y.iter().all(|v| v.is_finite()) || space.norm(&y) > guard || space.norm(&x) > guard {
            return Err(Error::Diverged { step: t, epoch: None, last_finite: r });
        }
    }
    Ok((y, used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_from_seed;
    use approx::assert_relative_eq;

    #[test]
    fn midpoint_degenerates_to_x_prev_at_alpha_one() {
        let y = DVector::from_vec(vec![5.0, -3.0]);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let r = asgd_midpoint(&y, &x, 1.0, 4.0, 0.5);
        assert_relative_eq!(r, x);
    }

    #[test]
    fn midpoint_is_even_split_at_half_alpha_without_memory_strength() {
        let y = DVector::from_vec(vec![2.0, 0.0]);
        let x = DVector::from_vec(vec![0.0, 2.0]);
        let r = asgd_midpoint(&y, &x, 0.5, 3.0, 0.0);
        assert_relative_eq!(r, DVector::from_vec(vec![1.0, 1.0]), epsilon = 1e-14);
    }

    /// Re-evaluates the two coefficient formulas with scalar arithmetic.
    #[test]
    fn midpoint_matches_independent_scalar_evaluation() {
        let (alpha, gamma, mu_tilde) = (2.0 / 3.0, 4.0, 0.5);
        let denom: f64 = gamma + (1.0 - alpha * alpha) * mu_tilde;
        let w_y: f64 = (1.0 - alpha) * (mu_tilde + gamma) / denom;
        let w_x: f64 = alpha * ((1.0 - alpha) * mu_tilde + gamma) / denom;
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let x = DVector::from_vec(vec![0.0, 1.0]);
        let r = asgd_midpoint(&y, &x, alpha, gamma, mu_tilde);
        assert_relative_eq!(r[0], w_y, epsilon = 1e-12);
        assert_relative_eq!(r[1], w_x, epsilon = 1e-12);
    }

    #[test]
    fn prox_is_stationary_on_agreeing_inputs() {
        let space = NormSpace::euclidean(2);
        let v = DVector::from_vec(vec![3.0, -1.0]);
        let out = asgd_prox(&v, &v, &DVector::zeros(2), 0.5, 2.0, 1.0, 0.5, &space).unwrap();
        assert_relative_eq!(out, v);
    }

    #[test]
    fn prox_closed_form_matches_numeric_minimization() {
        let space = NormSpace::euclidean(2);
        let g = DVector::from_vec(vec![5.0, 0.0]);
        let zero = DVector::zeros(2);
        let out = asgd_prox(&zero, &zero, &g, 1.0, 4.0, 1.0, 7.0, &space).unwrap();
        assert_relative_eq!(out, DVector::from_vec(vec![-1.0, 0.0]), epsilon = 1e-12);

        // no sampled candidate improves the prox objective
        let (alpha, gamma, mu) = (1.0f64, 4.0f64, 1.0f64);
        let objective = |x: &DVector<f64>| {
            alpha * (g.dot(x) + mu / 2.0 * space.norm_sq(&(&zero - x)))
                + ((1.0 - alpha) * 7.0 + gamma) / 2.0 * space.norm_sq(&(&zero - x))
        };
        let best = objective(&out);
        let mut rng = stream_from_seed(2);
        use rand::Rng;
        for _ in 0..20_000 {
            let cand = DVector::from_fn(2, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            assert!(objective(&cand) + 1e-12 >= best);
        }
    }

    /// The returned point zeroes the prox objective's gradient.
    #[test]
    fn prox_satisfies_first_order_optimality() {
        let space = NormSpace::new(nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0])).unwrap();
        let r = DVector::from_vec(vec![0.3, -0.2]);
        let x_prev = DVector::from_vec(vec![-1.0, 0.4]);
        let g = DVector::from_vec(vec![2.0, -5.0]);
        let (alpha, gamma, mu, mu_tilde) = (0.4, 1.7, 0.9, 0.45);
        let x = asgd_prox(&r, &x_prev, &g, alpha, gamma, mu, mu_tilde, &space).unwrap();
        let q = space.q();
        let resid = &g * alpha
            + q * (&x - &r) * (alpha * mu)
            + q * (&x - &x_prev) * ((1.0 - alpha) * mu_tilde + gamma);
        assert!(resid.norm() <= 1e-9 * (1.0 + g.norm()));
    }

    #[test]
    fn first_step_unrolls_to_a_single_prox() {
        let space = NormSpace::euclidean(2);
        let cfg = AsgdConfig::theory(1.0, 1.0, 0.0, 1);
        let x_tilde = DVector::from_vec(vec![2.0, -1.0]);
        let g_fixed = DVector::from_vec(vec![0.5, 0.5]);
        let mut oracle = {
            let g = g_fixed.clone();
            move |_: &DVector<f64>, _: &mut SampleStream| g.clone()
        };
        let (y, used) = asgd_inner(&mut oracle, &x_tilde, &cfg, &space, &mut stream_from_seed(0)).unwrap();
        let expect = asgd_prox(
            &x_tilde,
            &x_tilde,
            &g_fixed,
            cfg.alpha(1),
            cfg.gamma(1),
            cfg.mu_alg,
            cfg.mu_tilde,
            &space,
        )
        .unwrap();
        assert_relative_eq!(y, expect);
        assert_eq!(used, 1);
    }

    /// Deterministic recursion on the unit quadratic contracts at least as
    /// fast as the noise-free guarantee.
    #[test]
    fn zero_noise_contraction_at_theory_steps() {
        let space = NormSpace::euclidean(2);
        let cfg = AsgdConfig::theory(1.0, 1.0, 0.0, 16);
        let x_tilde = DVector::from_vec(vec![3.0, -4.0]);
        let mut oracle = |x: &DVector<f64>, _: &mut SampleStream| x.clone();
        let (y, _) = asgd_inner(&mut oracle, &x_tilde, &cfg, &space, &mut stream_from_seed(0)).unwrap();
        assert!(space.norm(&y) <= 0.25 * space.norm(&x_tilde));
    }

    #[test]
    fn theory_minibatch_ledger_is_exact() {
        let cfg = AsgdConfig::theory(1.0, 1.0, 1.0, 3);
        assert_eq!(cfg.minibatch(1), 256);
        assert_eq!(cfg.minibatch(2), 512);
        assert_eq!(cfg.minibatch(3), 768);
        assert_eq!(cfg.samples(), 1536);

        let mut calls = 0usize;
        let mut oracle = |x: &DVector<f64>, _: &mut SampleStream| {
            calls += 1;
            x.clone()
        };
        let space = NormSpace::euclidean(1);
        let (_, used) =
            asgd_inner(&mut oracle, &DVector::from_vec(vec![1.0]), &cfg, &space, &mut stream_from_seed(0)).unwrap();
        assert_eq!(used, calls);
        assert_eq!(used, 1536);
    }

    /// With all noise removed the recursion is reproducible bit-for-bit.
    #[test]
    fn deterministic_recursion_is_reproducible() {
        let space = NormSpace::euclidean(2);
        let cfg = AsgdConfig::theory(1.0, 4.0, 0.0, 9);
        let x_tilde = DVector::from_vec(vec![1.0, 1.0]);
        let run = || {
            let mut oracle = |x: &DVector<f64>, _: &mut SampleStream| x * 2.0;
            asgd_inner(&mut oracle, &x_tilde, &cfg, &space, &mut stream_from_seed(42)).unwrap()
        };
        let (a, _) = run();
        let (b, _) = run();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_guard_trips() {
        let space = NormSpace::euclidean(1);
        let cfg = AsgdConfig { mu_alg: 1.0, mu_tilde: 0.5, l: 1.0, steps: 64, minibatch_coeff: 0.0 };
        let mut oracle = |x: &DVector<f64>, _: &mut SampleStream| x * -1e9;
        let err = asgd_inner(&mut oracle, &DVector::from_vec(vec![1.0]), &cfg, &space, &mut stream_from_seed(0));
        assert!(matches!(err, Err(Error::Diverged { .. })));
    }
}
