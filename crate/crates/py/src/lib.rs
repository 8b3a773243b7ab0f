//! Python bindings: the norm geometry, problem instances, epoch schedules,
//! the variance-reduced runner, the baselines, and the harness entry points.
//! Vectors and matrices cross the boundary as plain lists.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use visor_core::baselines::{self, Averaging, SaConfig};
use visor_core::harness;
use visor_core::problems;
use visor_core::visor as vc_visor;
use visor_core::{metrics, stream_from_seed, Error};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vector(v: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(v)
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if nrows == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("expected a rectangular, non-empty matrix"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn parse_mode(mode: &str) -> PyResult<vc_visor::ScheduleMode> {
    match mode {
        "theory" => Ok(vc_visor::ScheduleMode::Theory),
        "experiment" => Ok(vc_visor::ScheduleMode::experiment_default()),
        other => Err(PyValueError::new_err(format!(
            "mode must be `theory` or `experiment`, got `{other}`"
        ))),
    }
}

/// A deterministic random stream; every stochastic call takes one explicitly.
#[pyclass(name = "Stream")]
struct PyStream {
    inner: visor_core::SampleStream,
}

#[pymethods]
impl PyStream {
    #[new]
    fn new(seed: u64) -> Self {
        Self { inner: stream_from_seed(seed) }
    }
}

/// Hilbert norm `‖x‖_Q = sqrt(xᵀQx)` with its dual and norm-aware gradient step.
#[pyclass(name = "NormSpace")]
struct PyNormSpace {
    inner: visor_core::NormSpace,
}

#[pymethods]
impl PyNormSpace {
    #[new]
    fn new(q: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: visor_core::NormSpace::new(matrix(q)?).map_err(py_err)? })
    }

    #[staticmethod]
    fn euclidean(dim: usize) -> Self {
        Self { inner: visor_core::NormSpace::euclidean(dim) }
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn norm(&self, x: Vec<f64>) -> f64 {
        self.inner.norm(&vector(x))
    }

    fn dual_norm(&self, y: Vec<f64>) -> PyResult<f64> {
        self.inner.dual_norm(&vector(y)).map_err(py_err)
    }

    fn gradient_step(&self, x0: Vec<f64>, g: Vec<f64>, eta: f64) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .gradient_step(&vector(x0), &vector(g), eta)
            .map_err(py_err)?
            .iter()
            .copied()
            .collect())
    }
}

/// A ground-truth stochastic problem instance.
#[pyclass(name = "Instance")]
struct PyInstance {
    inner: problems::ProblemInstance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn zeta_family(zeta: f64) -> PyResult<Self> {
        Ok(Self { inner: problems::zeta_family(zeta).map_err(py_err)? })
    }

    #[staticmethod]
    fn saa_failure_1d() -> PyResult<Self> {
        Ok(Self { inner: problems::saa_failure_1d().map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (dim, h, noise_std, x_true, kappa_tilde=None))]
    fn least_squares(
        dim: usize,
        h: Vec<Vec<f64>>,
        noise_std: f64,
        x_true: Vec<f64>,
        kappa_tilde: Option<f64>,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: problems::least_squares(dim, matrix(h)?, noise_std, vector(x_true), kappa_tilde)
                .map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (dim, lambda_, x_true, feature_cov=None))]
    fn logistic_glm(
        dim: usize,
        lambda_: f64,
        x_true: Vec<f64>,
        feature_cov: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let cov = match feature_cov {
            Some(rows) => matrix(rows)?,
            None => DMatrix::identity(dim, dim),
        };
        Ok(Self { inner: problems::logistic_glm(dim, lambda_, vector(x_true), cov).map_err(py_err)? })
    }

    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn x_star(&self) -> Vec<f64> {
        self.inner.x_star().iter().copied().collect()
    }

    fn hessian(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.hessian_at_opt())
    }

    fn noise_cov(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.noise_cov_at_opt())
    }

    /// `E‖A⁻¹∇f(x*,z)‖²` in the instance norm.
    fn tr_lambda(&self) -> f64 {
        self.inner.tr_lambda()
    }

    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = self.inner.constants();
        let d = PyDict::new(py);
        d.set_item("mu", c.mu)?;
        d.set_item("L", c.l)?;
        d.set_item("zeta", c.zeta)?;
        d.set_item("L_H", c.l_h)?;
        d.set_item("omega", c.omega)?;
        d.set_item("sigma1", c.sigma1)?;
        d.set_item("sigma2", c.sigma2)?;
        Ok(d)
    }

    fn sample_gradient(&self, x: Vec<f64>, stream: &mut PyStream) -> Vec<f64> {
        self.inner.sample_grad(&vector(x), &mut stream.inner).iter().copied().collect()
    }

    fn pop_gradient(&self, x: Vec<f64>) -> Vec<f64> {
        self.inner.pop_grad(&vector(x)).iter().copied().collect()
    }
}

/// A materialized epoch schedule.
#[pyclass(name = "Schedule")]
struct PySchedule {
    inner: vc_visor::VisorSchedule,
}

#[pymethods]
impl PySchedule {
    #[staticmethod]
    fn quadratic_sgd(
        n: usize,
        mu: f64,
        l: f64,
        zeta: f64,
        dist0_sq: f64,
        tr_lambda: f64,
        mode: &str,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: vc_visor::quadratic_sgd_schedule(n, mu, l, zeta, dist0_sq, tr_lambda, parse_mode(mode)?)
                .map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn quadratic_asgd(
        n: usize,
        mu: f64,
        l: f64,
        zeta: f64,
        dist0_sq: f64,
        tr_lambda: f64,
        mode: &str,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: vc_visor::quadratic_asgd_schedule(n, mu, l, zeta, dist0_sq, tr_lambda, parse_mode(mode)?)
                .map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("schedules serialize")
    }

    fn epochs(&self) -> usize {
        self.inner.epochs
    }

    fn anchor_sizes(&self) -> Vec<usize> {
        self.inner.anchor_sizes.clone()
    }

    fn total_cost(&self) -> usize {
        self.inner.total_cost()
    }

    fn budget(&self) -> usize {
        self.inner.budget
    }
}

/// Runs the variance-reduced epoch loop; returns `(estimate, samples_used)`.
#[pyfunction]
fn visor_run(
    instance: &PyInstance,
    schedule: &PySchedule,
    x0: Vec<f64>,
    stream: &mut PyStream,
) -> PyResult<(Vec<f64>, usize)> {
    let out = vc_visor::visor_run(&instance.inner, &schedule.inner, &vector(x0), &mut stream.inner)
        .map_err(py_err)?;
    Ok((out.estimate.iter().copied().collect(), out.samples_used))
}

/// Vanilla stochastic approximation with optional iterate averaging
/// (`averaging` in {"none", "full", "tail"}); returns a dict with the
/// estimate, divergence flag, and samples used.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn vanilla_sa<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    eta0: f64,
    beta: f64,
    n: usize,
    averaging: &str,
    x0: Vec<f64>,
    stream: &mut PyStream,
) -> PyResult<Bound<'py, PyDict>> {
    let averaging = match averaging {
        "none" => Averaging::None,
        "full" => Averaging::Full,
        "tail" => Averaging::Tail,
        other => return Err(PyValueError::new_err(format!("unknown averaging `{other}`"))),
    };
    let cfg = SaConfig { eta0, beta, steps: n, averaging };
    cfg.validate().map_err(py_err)?;
    let out = baselines::vanilla_sa(&instance.inner, &cfg, &vector(x0), &mut stream.inner);
    let d = PyDict::new(py);
    d.set_item("estimate", out.estimate.iter().copied().collect::<Vec<f64>>())?;
    d.set_item("last_iterate", out.last_iterate.iter().copied().collect::<Vec<f64>>())?;
    d.set_item("diverged", out.diverged)?;
    d.set_item("samples_used", out.samples_used)?;
    Ok(d)
}

/// Closed-form sample-average estimate from `n` fresh quadratic pairs;
/// `None` when the averaged curvature is not positive definite.
#[pyfunction]
fn saa_estimate(instance: &PyInstance, n: usize, stream: &mut PyStream) -> PyResult<Option<Vec<f64>>> {
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        match instance.inner.draw_quadratic_pair(&mut stream.inner) {
            Some(pair) => samples.push(pair),
            None => {
                return Err(PyValueError::new_err(
                    "instance does not expose quadratic sample pairs",
                ))
            }
        }
    }
    match baselines::saa_quadratic(&samples).map_err(py_err)? {
        baselines::SaaOutcome::Estimate(x) => Ok(Some(x.iter().copied().collect())),
        baselines::SaaOutcome::Degenerate => Ok(None),
    }
}

/// `Λ = A⁻¹ΣA⁻¹` and its trace.
#[pyfunction]
fn optimal_covariance(a: Vec<Vec<f64>>, sigma: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let cov = metrics::optimal_covariance(&matrix(a)?, &matrix(sigma)?).map_err(py_err)?;
    Ok((matrix_rows(&cov.lambda), cov.trace))
}

/// Local-minimax reference line `tr(A⁻¹ΣA⁻¹)/(4(π²+1)n)`.
#[pyfunction]
fn lower_bound_line(a: Vec<Vec<f64>>, sigma: Vec<Vec<f64>>, n: usize) -> PyResult<f64> {
    metrics::lower_bound_line(&matrix(a)?, &matrix(sigma)?, n).map_err(py_err)
}

/// `n·‖estimate − x*‖²` in the Euclidean norm (or a supplied Q).
#[pyfunction]
#[pyo3(signature = (estimate, x_star, n, q=None))]
fn rescaled_error(estimate: Vec<f64>, x_star: Vec<f64>, n: usize, q: Option<Vec<Vec<f64>>>) -> PyResult<f64> {
    let space = match q {
        Some(rows) => visor_core::NormSpace::new(matrix(rows)?).map_err(py_err)?,
        None => visor_core::NormSpace::euclidean(estimate.len()),
    };
    Ok(metrics::rescaled_error(&vector(estimate), &vector(x_star), n, &space))
}

/// Runs a sweep from a JSON config and returns the aggregated CSV text.
#[pyfunction]
fn run_sweep_json(config: &str) -> PyResult<String> {
    let cfg: harness::SweepConfig =
        serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let rows = harness::run_sweep(&cfg).map_err(py_err)?;
    Ok(harness::sweep_to_csv(&rows))
}

/// Runs the verification suite; returns a list of check dicts.
#[pyfunction]
#[pyo3(signature = (instance=None, seed=0))]
fn verify_families<'py>(
    py: Python<'py>,
    instance: Option<&str>,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let results = harness::verify::verify_families(instance, seed).map_err(py_err)?;
    results
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("instance", r.instance)?;
            d.set_item("check", r.check)?;
            d.set_item("statistic", r.statistic)?;
            d.set_item("bound", r.bound)?;
            d.set_item("pass", r.pass)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn visor_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStream>()?;
    m.add_class::<PyNormSpace>()?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PySchedule>()?;
    m.add_function(wrap_pyfunction!(visor_run, m)?)?;
    m.add_function(wrap_pyfunction!(vanilla_sa, m)?)?;
    m.add_function(wrap_pyfunction!(saa_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_line, m)?)?;
    m.add_function(wrap_pyfunction!(rescaled_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep_json, m)?)?;
    m.add_function(wrap_pyfunction!(verify_families, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
