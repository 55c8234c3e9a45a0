use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("matrix is not exactly symmetric")]
    NotSymmetric,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (relative residual {residual:e})")]
    NotConverged { sweeps: usize, residual: f64 },
    #[error("cannot orthonormalize a degenerate frame (‖HᵀH − I‖_F = {defect:e})")]
    Degenerate { defect: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("step index {index} out of range for {steps} steps")]
    StepOutOfRange { index: u64, steps: u64 },
    #[error("refinement level {level} exceeds the maximum of {max}")]
    RefinementTooDeep { level: u32, max: u32 },
    #[error("invalid noise parameters: {0}")]
    InvalidParameters(String),
    #[error("noise dump: {0}")]
    Dump(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model family `{0}`")]
    UnknownModel(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("expression error at byte {position}: {message}")]
    Expression { position: usize, message: String },
    #[error("eigenvalues must be strictly ascending (violated at index {index})")]
    NotStrictlyAscending { index: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid initial state: {0}")]
    InvalidInitialState(String),
    #[error("eigenvalue gap {gap:e} at or below collision tolerance {eps:e}")]
    GapTooSmall { gap: f64, eps: f64 },
    #[error("ordering inverted at t = {t}")]
    OrderingInverted { t: f64 },
    #[error("state exploded at t = {t} (norm {norm:e})")]
    Explosion { t: f64, norm: f64 },
    #[error("eigenvalue {value} left the domain [{lower}, {upper}]")]
    DomainViolation { value: f64, lower: f64, upper: f64 },
    #[error("{0}")]
    Unsupported(String),
}
