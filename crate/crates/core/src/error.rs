use thiserror::Error;

/// Errors raised by the engine.
///
/// Variants are grouped so a front end can map them onto exit statuses:
/// domain/validation problems, numerical non-convergence, and I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter {xi:?} outside the open domain: {reason}")]
    Domain { xi: Vec<f64>, reason: String },

    #[error("sample point {x} outside the support {support}")]
    Support { x: f64, support: String },

    #[error("family construction failed: {0}")]
    Construction(String),

    #[error("negative density {value:e} at x = {x}, xi = {xi:?}")]
    NegativeDensity { x: f64, xi: Vec<f64>, value: f64 },

    #[error("matrix is not positive definite (eigenvalue {eigenvalue:e}, near-null direction {direction:?})")]
    Degenerate { eigenvalue: f64, direction: Vec<f64> },

    #[error("singular matrix")]
    Singular,

    #[error("integrand is not finite at x = {x}")]
    Integration { x: f64 },

    #[error("numerical procedure did not converge: {0}")]
    NonConverged(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tensors evaluated at different base points: {left:?} vs {right:?}")]
    BasePointMismatch { left: Vec<f64>, right: Vec<f64> },

    #[error("finite-difference stencil leaves the domain at {xi:?}; try a smaller step")]
    StencilOutsideDomain { xi: Vec<f64> },

    #[error("geodesic reached the domain boundary at t = {t}")]
    Boundary { t: f64 },

    #[error("geodesic integration failed at t = {t}")]
    StepFailure { t: f64 },

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

/// Broad classification used by the CLI when choosing an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Singular
            | Error::Integration { .. }
            | Error::NonConverged(_)
            | Error::StepFailure { .. }
            | Error::Experiment(_) => ErrorClass::Numerical,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
