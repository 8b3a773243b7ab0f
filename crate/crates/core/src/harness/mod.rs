//! Experiment driver: Monte-Carlo sweeps over methods × instances × budgets,
//! two-dimensional rescaled-error histograms, and the assumption/property
//! verification suite. Sweeps are deterministic given the config: trial `i`
//! runs on the stream seeded with `base_seed + i`, and aggregation folds the
//! per-trial records in index order, so results do not depend on execution
//! order or thread count.

pub mod verify;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{saa_quadratic, vanilla_sa, Averaging, SaConfig, SaaOutcome};
use crate::error::{Error, Result};
use crate::normspace::NormSpace;
use crate::problems::{self, ProblemInstance, QuadraticNoise};
use crate::rng::SampleStream;
use crate::visor::{
    quadratic_asgd_schedule, quadratic_sgd_schedule, visor_run, ScheduleMode, VisorSchedule,
};

/// Instance descriptor: name plus parameter map, as written in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum InstanceSpec {
    /// Built per grid cell from the cell's ζ².
    ZetaFamily,
    SaaFailure1d,
    LeastSquares {
        dim: usize,
        h_diag: Vec<f64>,
        noise_std: f64,
        x_true: Vec<f64>,
        #[serde(default)]
        kappa_tilde: Option<f64>,
    },
    LogisticGlm {
        dim: usize,
        lambda: f64,
        x_true: Vec<f64>,
        #[serde(default)]
        feature_cov_diag: Option<Vec<f64>>,
    },
    GeneralQuadratic {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        noise: QuadraticNoiseSpec,
        #[serde(default)]
        norm: NormSpec,
    },
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuadraticNoiseSpec {
    #[default]
    None,
    Rademacher {
        scale: f64,
        matrix: Vec<Vec<f64>>,
        additive_cov_diag: Vec<f64>,
    },
    GaussianSymmetric {
        entry_std: f64,
        additive_cov_diag: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormSpec {
    #[default]
    Euclidean,
    /// The norm induced by the population Hessian.
    Hessian,
}

impl InstanceSpec {
    /// Builds the instance for one grid cell. `zeta_sq` is only consumed by
    /// the ζ-family; other instances carry their own noise level.
    pub fn build(&self, zeta_sq: f64) -> Result<ProblemInstance> {
        match self {
            InstanceSpec::ZetaFamily => problems::zeta_family(zeta_sq.sqrt()),
            InstanceSpec::SaaFailure1d => problems::saa_failure_1d(),
            InstanceSpec::LeastSquares { dim, h_diag, noise_std, x_true, kappa_tilde } => {
                if h_diag.len() != *dim {
                    return Err(Error::InvalidConfig {
                        field: "instance.h_diag".into(),
                        message: format!("expected {dim} entries, got {}", h_diag.len()),
                    });
                }
                problems::least_squares(
                    *dim,
                    DMatrix::from_diagonal(&DVector::from_vec(h_diag.clone())),
                    *noise_std,
                    DVector::from_vec(x_true.clone()),
                    *kappa_tilde,
                )
            }
            InstanceSpec::LogisticGlm { dim, lambda, x_true, feature_cov_diag } => {
                let cov = match feature_cov_diag {
                    Some(d) => DMatrix::from_diagonal(&DVector::from_vec(d.clone())),
                    None => DMatrix::identity(*dim, *dim),
                };
                problems::logistic_glm(*dim, *lambda, DVector::from_vec(x_true.clone()), cov)
            }
            InstanceSpec::GeneralQuadratic { a, b, noise, norm } => {
                let dim = b.len();
                let a = dense(a, dim)?;
                let noise = match noise {
                    QuadraticNoiseSpec::None => QuadraticNoise::None,
                    QuadraticNoiseSpec::Rademacher { scale, matrix, additive_cov_diag } => {
                        QuadraticNoise::RademacherScaled {
                            scale: *scale,
                            matrix: dense(matrix, dim)?,
                            additive_cov: DMatrix::from_diagonal(&DVector::from_vec(additive_cov_diag.clone())),
                        }
                    }
                    QuadraticNoiseSpec::GaussianSymmetric { entry_std, additive_cov_diag } => {
                        QuadraticNoise::GaussianSymmetric {
                            entry_std: *entry_std,
                            additive_cov: DMatrix::from_diagonal(&DVector::from_vec(additive_cov_diag.clone())),
                        }
                    }
                };
                let space = match norm {
                    NormSpec::Euclidean => NormSpace::euclidean(dim),
                    NormSpec::Hessian => NormSpace::new(a.clone())?,
                };
                problems::general_quadratic(a, DVector::from_vec(b.clone()), noise, space)
            }
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            InstanceSpec::ZetaFamily => "zeta-family",
            InstanceSpec::SaaFailure1d => "saa-failure-1d",
            InstanceSpec::LeastSquares { .. } => "least-squares",
            InstanceSpec::LogisticGlm { .. } => "logistic-glm",
            InstanceSpec::GeneralQuadratic { .. } => "general-quadratic",
        }
    }
}

fn dense(rows: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidConfig {
            field: "instance.matrix".into(),
            message: format!("expected a {dim}x{dim} matrix"),
        });
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

/// Stepsize rule `η₀ = coeff · ζ^zeta_pow`, matching the grids the
/// stochastic-approximation sweeps scan (`ζ⁻⁴, ζ⁻³, ζ⁻²` constant;
/// `ζ⁻¹, ζ⁻², ζ⁻³` diminishing).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRule {
    pub coeff: f64,
    #[serde(default)]
    pub zeta_pow: f64,
}

impl StepRule {
    pub fn eta0(&self, zeta_sq: f64) -> f64 {
        let zeta = zeta_sq.max(0.0).sqrt();
        self.coeff * zeta.powf(self.zeta_pow)
    }
}

/// Method descriptor for sweeps and single runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodSpec {
    VisorSgd(VisorOptions),
    VisorAsgd(VisorOptions),
    Sa { eta: StepRule, #[serde(default)] beta: f64 },
    RpjFull { eta: StepRule, #[serde(default)] beta: f64 },
    RpjTail { eta: StepRule, #[serde(default)] beta: f64 },
    Saa {
        /// Truncation cap applied to the error norm before squaring; the
        /// untruncated mean is infinite on the blow-up instance.
        #[serde(default = "default_saa_cap")]
        cap: f64,
    },
}

fn default_saa_cap() -> f64 {
    1e6
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct VisorOptions {
    /// Fixed estimate of `E‖A⁻¹∇f(x*,z)‖²` for the epoch-count formula;
    /// when unset the instance's exact value is used unless `pilot` asks for
    /// a Monte-Carlo estimate paid out of the budget.
    pub tr_lambda: Option<f64>,
    /// Estimate the statistical floor with a pilot of at most 1% of the
    /// budget instead of using the exact instance value.
    pub pilot: bool,
    /// Bypass the schedule factory entirely.
    pub schedule: Option<VisorSchedule>,
}

impl MethodSpec {
    /// Stable row label; stepsize rules are folded in so grid cells stay
    /// distinguishable.
    pub fn label(&self) -> String {
        match self {
            MethodSpec::VisorSgd(_) => "visor-sgd".into(),
            MethodSpec::VisorAsgd(_) => "visor-asgd".into(),
            MethodSpec::Sa { eta, beta } => format!("sa[eta={}z^{};beta={}]", eta.coeff, eta.zeta_pow, beta),
            MethodSpec::RpjFull { eta, beta } => {
                format!("rpj-full[eta={}z^{};beta={}]", eta.coeff, eta.zeta_pow, beta)
            }
            MethodSpec::RpjTail { eta, beta } => {
                format!("rpj-tail[eta={}z^{};beta={}]", eta.coeff, eta.zeta_pow, beta)
            }
            MethodSpec::Saa { .. } => "saa".into(),
        }
    }
}

/// Budget per grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BudgetRule {
    /// `n = ⌈factor · ζ²⌉`.
    PerZeta { factor: f64 },
    Fixed { n: usize },
}

impl BudgetRule {
    pub fn n(&self, zeta_sq: f64) -> usize {
        match self {
            BudgetRule::PerZeta { factor } => (factor * zeta_sq).ceil() as usize,
            BudgetRule::Fixed { n } => *n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Theory,
    Experiment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorNorm {
    /// `n‖x̂−x*‖₂²` regardless of the instance geometry.
    #[default]
    Euclidean,
    /// The instance's own norm.
    Instance,
}

/// Sweep configuration; the config-file schema is this struct, JSON-encoded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub instance: InstanceSpec,
    pub methods: Vec<MethodSpec>,
    /// ζ² grid; leave empty for instances that carry their own noise level.
    #[serde(default)]
    pub zeta_grid: Vec<f64>,
    pub budget: BudgetRule,
    pub trials: usize,
    pub base_seed: u64,
    pub mode: RunMode,
    #[serde(default)]
    pub experiment_params: Option<crate::visor::ExperimentParams>,
    #[serde(default)]
    pub error_norm: ErrorNorm,
    /// Start point; defaults to the origin.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

impl SweepConfig {
    pub fn schedule_mode(&self) -> ScheduleMode {
        match self.mode {
            RunMode::Theory => ScheduleMode::Theory,
            RunMode::Experiment => {
                ScheduleMode::Experiment(self.experiment_params.clone().unwrap_or_default())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig { field: "trials".into(), message: "must be at least 1".into() });
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig { field: "methods".into(), message: "must not be empty".into() });
        }
        if matches!(self.instance, InstanceSpec::ZetaFamily) && self.zeta_grid.is_empty() {
            return Err(Error::InvalidConfig {
                field: "zeta_grid".into(),
                message: "the zeta-family instance needs at least one zeta² value".into(),
            });
        }
        if self.zeta_grid.iter().any(|&z| !(z >= 1.0)) {
            return Err(Error::InvalidConfig {
                field: "zeta_grid".into(),
                message: "zeta² values must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// One Monte-Carlo run of one method on one instance.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub method: String,
    pub instance: String,
    pub zeta_sq: f64,
    pub n: usize,
    pub seed: u64,
    pub estimate: Vec<f64>,
    pub samples_used: usize,
    pub rescaled_error: Option<f64>,
    pub diverged: bool,
}

/// Aggregate of one (method, ζ², n) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub instance: String,
    pub method: String,
    pub zeta_sq: f64,
    pub n: usize,
    pub trials: usize,
    pub mean_rescaled_err: Option<f64>,
    pub stderr: Option<f64>,
    pub divergence_rate: f64,
    pub infeasible: bool,
}

fn error_space(instance: &ProblemInstance, which: ErrorNorm) -> NormSpace {
    match which {
        ErrorNorm::Euclidean => NormSpace::euclidean(instance.dim()),
        ErrorNorm::Instance => instance.space().clone(),
    }
}

/// Monte-Carlo pilot for `E‖A⁻¹(∇f(x₀,z) − ∇F(x₀))‖²`, spending `draws`
/// samples at the start point. Crude but sufficient for the logarithmic
/// epoch-count formula.
pub fn pilot_tr_lambda(
    instance: &ProblemInstance,
    x0: &DVector<f64>,
    draws: usize,
    stream: &mut SampleStream,
) -> f64 {
    let chol = nalgebra::Cholesky::new(instance.hessian_at_opt().clone()).expect("hessian is positive definite");
    let grads: Vec<DVector<f64>> = (0..draws.max(2)).map(|_| instance.sample_grad(x0, stream)).collect();
    let mean = grads.iter().fold(DVector::zeros(instance.dim()), |acc, g| acc + g) / grads.len() as f64;
    let space = instance.space();
    let sum: f64 = grads
        .iter()
        .map(|g| space.norm_sq(&chol.solve(&(g - &mean))))
        .sum();
    (sum / (grads.len() - 1) as f64).max(f64::MIN_POSITIVE)
}

fn build_visor_schedule(
    instance: &ProblemInstance,
    opts: &VisorOptions,
    accelerated: bool,
    n: usize,
    x0: &DVector<f64>,
    mode: ScheduleMode,
    stream: &mut SampleStream,
) -> Result<(VisorSchedule, usize)> {
    if let Some(schedule) = &opts.schedule {
        return Ok((schedule.clone(), 0));
    }
    let mut pilot_cost = 0usize;
    let tr_lambda = match (opts.tr_lambda, opts.pilot) {
        (Some(v), _) => v,
        (None, true) => {
            let draws = (n / 100).clamp(4, 512);
            pilot_cost = draws;
            pilot_tr_lambda(instance, x0, draws, stream)
        }
        (None, false) => instance.tr_lambda(),
    };
    let c = instance.constants();
    let dist0_sq = instance.space().norm_sq(&(x0 - instance.x_star())).max(1e-12);
    let budget = n.saturating_sub(pilot_cost);
    let schedule = if accelerated {
        quadratic_asgd_schedule(budget, c.mu, c.l, c.zeta, dist0_sq, tr_lambda, mode)?
    } else {
        quadratic_sgd_schedule(budget, c.mu, c.l, c.zeta, dist0_sq, tr_lambda, mode)?
    };
    Ok((schedule, pilot_cost))
}

/// Runs one seeded trial. Divergence comes back as a flagged record;
/// schedule infeasibility and configuration problems are errors.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    instance: &ProblemInstance,
    method: &MethodSpec,
    n: usize,
    zeta_sq: f64,
    seed: u64,
    mode: ScheduleMode,
    error_norm: ErrorNorm,
    x0: &DVector<f64>,
) -> Result<TrialRecord> {
    let mut stream = crate::rng::stream_from_seed(seed);
    let space = error_space(instance, error_norm);
    let record = |estimate: DVector<f64>, samples_used: usize, diverged: bool, cap: Option<f64>| {
        let rescaled_error = if diverged {
            None
        } else {
            let dist = space.norm(&(&estimate - instance.x_star()));
            let dist = cap.map_or(dist, |c| dist.min(c));
            Some(n as f64 * dist * dist)
        };
        TrialRecord {
            method: method.label(),
            instance: instance.name().to_string(),
            zeta_sq,
            n,
            seed,
            estimate: estimate.iter().copied().collect(),
            samples_used,
            rescaled_error,
            diverged,
        }
    };

    match method {
        MethodSpec::VisorSgd(opts) | MethodSpec::VisorAsgd(opts) => {
            let accelerated = matches!(method, MethodSpec::VisorAsgd(_));
            let (schedule, pilot_cost) =
                build_visor_schedule(instance, opts, accelerated, n, x0, mode, &mut stream)?;
            match visor_run(instance, &schedule, x0, &mut stream) {
                Ok(out) => Ok(record(out.estimate, out.samples_used + pilot_cost, false, None)),
                Err(Error::Diverged { last_finite, .. }) => Ok(record(last_finite, n, true, None)),
                Err(other) => Err(other),
            }
        }
        MethodSpec::Sa { eta, beta } | MethodSpec::RpjFull { eta, beta } | MethodSpec::RpjTail { eta, beta } => {
            let averaging = match method {
                MethodSpec::Sa { .. } => Averaging::None,
                MethodSpec::RpjFull { .. } => Averaging::Full,
                _ => Averaging::Tail,
            };
            let cfg = SaConfig { eta0: eta.eta0(zeta_sq), beta: *beta, steps: n, averaging };
            cfg.validate()?;
            let out = vanilla_sa(instance, &cfg, x0, &mut stream);
            Ok(record(out.estimate, out.samples_used, out.diverged, None))
        }
        MethodSpec::Saa { cap } => {
            let mut samples = Vec::with_capacity(n);
            for _ in 0..n {
                match instance.draw_quadratic_pair(&mut stream) {
                    Some(pair) => samples.push(pair),
                    None => {
                        return Err(Error::InvalidConfig {
                            field: "methods.saa".into(),
                            message: format!(
                                "instance `{}` does not expose quadratic sample pairs",
                                instance.name()
                            ),
                        })
                    }
                }
            }
            match saa_quadratic(&samples)? {
                SaaOutcome::Estimate(x) => Ok(record(x, n, false, Some(*cap))),
                SaaOutcome::Degenerate => Ok(record(x0.clone(), n, true, None)),
            }
        }
    }
}

fn aggregate(rows: &[TrialRecord], instance: &str, method: &str, zeta_sq: f64, n: usize) -> SweepRow {
    let trials = rows.len();
    let diverged = rows.iter().filter(|r| r.diverged).count();
    let errs: Vec<f64> = rows.iter().filter_map(|r| r.rescaled_error).collect();
    let (mean, stderr) = if errs.is_empty() {
        (None, None)
    } else {
        let m = errs.iter().sum::<f64>() / errs.len() as f64;
        let var = errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (errs.len().max(2) - 1) as f64;
        (Some(m), Some((var / errs.len() as f64).sqrt()))
    };
    SweepRow {
        instance: instance.to_string(),
        method: method.to_string(),
        zeta_sq,
        n,
        trials,
        mean_rescaled_err: mean,
        stderr,
        divergence_rate: diverged as f64 / trials as f64,
        infeasible: false,
    }
}

/// Runs the full sweep: every method on every grid cell, `trials` seeded
/// trials each. Cells whose theory-mode schedule does not fit the budget are
/// reported infeasible rather than skipped.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let x0_cfg = cfg.x0.clone();
    let grid: Vec<f64> = if cfg.zeta_grid.is_empty() { vec![f64::NAN] } else { cfg.zeta_grid.clone() };
    let mode = cfg.schedule_mode();

    let mut out = Vec::new();
    for &zeta_cell in &grid {
        let instance = if zeta_cell.is_nan() {
            cfg.instance.build(1.0)?
        } else {
            cfg.instance.build(zeta_cell)?
        };
        let zeta_sq = if zeta_cell.is_nan() { instance.constants().zeta.powi(2) } else { zeta_cell };
        let n = cfg.budget.n(zeta_sq);
        let x0 = match &x0_cfg {
            Some(v) => {
                Error::check_dim(instance.dim(), v.len())?;
                DVector::from_vec(v.clone())
            }
            None => DVector::zeros(instance.dim()),
        };
        for method in &cfg.methods {
            let trials: Vec<Result<TrialRecord>> = (0..cfg.trials)
                .into_par_iter()
                .map(|i| {
                    run_trial(
                        &instance,
                        method,
                        n,
                        zeta_sq,
                        cfg.base_seed.wrapping_add(i as u64),
                        mode.clone(),
                        cfg.error_norm,
                        &x0,
                    )
                })
                .collect();
            let mut records = Vec::with_capacity(trials.len());
            let mut infeasible = false;
            for t in trials {
                match t {
                    Ok(rec) => records.push(rec),
                    Err(Error::InfeasibleSchedule { .. }) => {
                        infeasible = true;
                        break;
                    }
                    Err(other) => return Err(other),
                }
            }
            if infeasible {
                out.push(SweepRow {
                    instance: instance.name().to_string(),
                    method: method.label(),
                    zeta_sq,
                    n,
                    trials: cfg.trials,
                    mean_rescaled_err: None,
                    stderr: None,
                    divergence_rate: 0.0,
                    infeasible: true,
                });
            } else {
                out.push(aggregate(&records, instance.name(), &method.label(), zeta_sq, n));
            }
        }
    }
    Ok(out)
}

/// Fixed sweep CSV schema.
pub const SWEEP_CSV_HEADER: &str =
    "instance,method,zeta_sq,n,trials,mean_rescaled_err,stderr,divergence_rate,infeasible";

/// Serializes sweep rows with the fixed column set; identical configs and
/// seeds produce identical bytes.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.instance,
            r.method,
            r.zeta_sq,
            r.n,
            r.trials,
            fmt_opt(r.mean_rescaled_err),
            fmt_opt(r.stderr),
            r.divergence_rate,
            r.infeasible
        ));
    }
    out
}

/// Configuration of a two-dimensional rescaled-error histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapConfig {
    pub instance: InstanceSpec,
    pub method: MethodSpec,
    pub zeta_sq: f64,
    pub n: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub mode: RunMode,
    #[serde(default)]
    pub experiment_params: Option<crate::visor::ExperimentParams>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_range")]
    pub x_range: (f64, f64),
    #[serde(default = "default_range")]
    pub y_range: (f64, f64),
}

fn default_bins() -> usize {
    40
}

fn default_range() -> (f64, f64) {
    (-4.0, 4.0)
}

/// Binned counts of `√n(x̂ − x*)` over two-dimensional trials.
#[derive(Clone, Debug)]
pub struct HeatmapGrid {
    pub bins: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Row-major: `counts[iy * bins + ix]`.
    pub counts: Vec<u64>,
    /// Trials that landed inside the grid.
    pub included: usize,
    pub diverged: usize,
    pub trials: usize,
    /// The raw error vectors, for moment checks.
    pub errors: Vec<DVector<f64>>,
}

impl HeatmapGrid {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_bin_low,y_bin_low,count\n");
        let dx = (self.x_range.1 - self.x_range.0) / self.bins as f64;
        let dy = (self.y_range.1 - self.y_range.0) / self.bins as f64;
        for iy in 0..self.bins {
            for ix in 0..self.bins {
                out.push_str(&format!(
                    "{},{},{}\n",
                    self.x_range.0 + ix as f64 * dx,
                    self.y_range.0 + iy as f64 * dy,
                    self.counts[iy * self.bins + ix]
                ));
            }
        }
        out
    }
}

/// Runs the trials and bins the rescaled error cloud. Two-dimensional
/// instances only.
pub fn heatmap_data(cfg: &HeatmapConfig) -> Result<HeatmapGrid> {
    if cfg.trials == 0 {
        return Err(Error::InvalidConfig { field: "trials".into(), message: "must be at least 1".into() });
    }
    if cfg.bins == 0 {
        return Err(Error::InvalidConfig { field: "bins".into(), message: "must be at least 1".into() });
    }
    let instance = cfg.instance.build(cfg.zeta_sq)?;
    Error::check_dim(2, instance.dim())?;
    let mode = match cfg.mode {
        RunMode::Theory => ScheduleMode::Theory,
        RunMode::Experiment => ScheduleMode::Experiment(cfg.experiment_params.clone().unwrap_or_default()),
    };
    let x0 = DVector::zeros(2);
    let records: Vec<Result<TrialRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            run_trial(
                &instance,
                &cfg.method,
                cfg.n,
                cfg.zeta_sq,
                cfg.base_seed.wrapping_add(i as u64),
                mode.clone(),
                ErrorNorm::Euclidean,
                &x0,
            )
        })
        .collect();

    let mut counts = vec![0u64; cfg.bins * cfg.bins];
    let mut included = 0usize;
    let mut diverged = 0usize;
    let mut errors = Vec::new();
    let scale = (cfg.n as f64).sqrt();
    let dx = (cfg.x_range.1 - cfg.x_range.0) / cfg.bins as f64;
    let dy = (cfg.y_range.1 - cfg.y_range.0) / cfg.bins as f64;
    for rec in records {
        let rec = rec?;
        if rec.diverged {
            diverged += 1;
            continue;
        }
        let err = DVector::from_vec(rec.estimate.clone()) - instance.x_star();
        let e = err * scale;
        let ix = ((e[0] - cfg.x_range.0) / dx).floor();
        let iy = ((e[1] - cfg.y_range.0) / dy).floor();
        if ix >= 0.0 && iy >= 0.0 && (ix as usize) < cfg.bins && (iy as usize) < cfg.bins {
            counts[iy as usize * cfg.bins + ix as usize] += 1;
            included += 1;
        }
        errors.push(e);
    }
    Ok(HeatmapGrid {
        bins: cfg.bins,
        x_range: cfg.x_range,
        y_range: cfg.y_range,
        counts,
        included,
        diverged,
        trials: cfg.trials,
        errors,
    })
}

/// Single-run configuration for the `run` CLI subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub instance: InstanceSpec,
    pub method: MethodSpec,
    pub n: usize,
    #[serde(default = "default_zeta_sq")]
    pub zeta_sq: f64,
    pub seed: u64,
    pub mode: RunMode,
    #[serde(default)]
    pub experiment_params: Option<crate::visor::ExperimentParams>,
    #[serde(default)]
    pub error_norm: ErrorNorm,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

fn default_zeta_sq() -> f64 {
    1.0
}

/// Runs a single seeded trial from a [`RunConfig`].
pub fn run_single(cfg: &RunConfig) -> Result<TrialRecord> {
    if cfg.n == 0 {
        return Err(Error::InvalidConfig { field: "n".into(), message: "must be at least 1".into() });
    }
    let instance = cfg.instance.build(cfg.zeta_sq)?;
    let x0 = match &cfg.x0 {
        Some(v) => {
            Error::check_dim(instance.dim(), v.len())?;
            DVector::from_vec(v.clone())
        }
        None => DVector::zeros(instance.dim()),
    };
    let mode = match cfg.mode {
        RunMode::Theory => ScheduleMode::Theory,
        RunMode::Experiment => ScheduleMode::Experiment(cfg.experiment_params.clone().unwrap_or_default()),
    };
    run_trial(&instance, &cfg.method, cfg.n, cfg.zeta_sq, cfg.seed, mode, cfg.error_norm, &x0)
}
