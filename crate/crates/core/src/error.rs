use thiserror::Error;

/// Raised by a vector field evaluated outside its admissible region.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("{quantity} = {value:e} is below the floor {floor:e}")]
    NearSingular {
        quantity: &'static str,
        value: f64,
        floor: f64,
    },
    #[error("state has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("energy scaling g({energy}) = {value} is not strictly positive")]
    Scaling { energy: f64, value: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error(transparent)]
    Field(#[from] FieldError),

    #[error("rhs failed at t = {t}: {source}; state = {state:?}")]
    Rhs {
        t: f64,
        state: Vec<f64>,
        #[source]
        source: FieldError,
    },

    #[error("step limit of {max_steps} exceeded at t = {t}")]
    StepLimit { max_steps: usize, t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("invalid integrator configuration: {0}")]
    Config(String),

    #[error("no return to the reference state within tolerance {tol:e}")]
    NoReturn { tol: f64 },

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("observable `{name}` lives on {found}, expected {expected}")]
    ChartMismatch {
        name: String,
        expected: String,
        found: String,
    },

    #[error(
        "symplectic matrix `{structure}` is degenerate (condition {condition:e}) at {state:?}"
    )]
    Degenerate {
        structure: String,
        condition: f64,
        state: Vec<f64>,
    },

    #[error("matrix is not antihermitian (max defect {defect:e})")]
    NotAntiHermitian { defect: f64 },

    #[error("constraint `{name}` violated at initial state: residual {residual:e}")]
    ConstraintViolated { name: String, residual: f64 },

    #[error("`{name}` does not commute with the fiber charge: residual {residual:e}")]
    NonCommuting { name: String, residual: f64 },

    #[error("eigenvalue collision at t = {t} (gap {gap:e})")]
    EigenvalueCollision { t: f64, gap: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
