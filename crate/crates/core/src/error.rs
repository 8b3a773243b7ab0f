use nalgebra::DVector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix entry ({row},{col}) is not symmetric: |q_ij - q_ji| = {delta:.3e} > 1e-12")]
    NotSymmetric { row: usize, col: usize, delta: f64 },

    #[error("matrix is not positive definite: Cholesky factorization failed")]
    NotPositiveDefinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("iterates diverged at step {step} (epoch {})", epoch.map(|k| k.to_string()).unwrap_or_else(|| "-".into()))]
    Diverged {
        step: usize,
        epoch: Option<usize>,
        last_finite: DVector<f64>,
    },

    #[error("schedule infeasible: {binding} needs {needed} samples but the budget is {budget}")]
    InfeasibleSchedule {
        binding: String,
        needed: usize,
        budget: usize,
    },

    #[error("sample budget exceeded: attempted {attempted} of {budget}")]
    BudgetExceeded { attempted: usize, budget: usize },

    #[error("operation requires a quadratic instance (instance `{0}` has a non-constant Hessian)")]
    NotQuadratic(String),

    #[error("population solve did not reach tolerance: gradient norm {grad_norm:.3e} > {tol:.3e}")]
    PopulationSolveFailed { grad_norm: f64, tol: f64 },

    #[error("empty sample list")]
    EmptySamples,

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
