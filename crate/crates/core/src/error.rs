use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("numerical failure: {0}")]
    NoConvergence(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("variable x{index} out of range for g = {g}")]
    UnknownVariable { index: usize, g: usize },
    #[error("moment sequence of degree {have} cannot serve degree {need}")]
    InsufficientDegree { have: usize, need: usize },
    #[error("not an isometry: ||V^T V - I|| = {0:.3e}")]
    NotIsometry(f64),
    #[error("invalid moment sequence: {0}")]
    InvalidMoments(String),
    #[error("problem too large: flattened dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("point is not strictly feasible (min eigenvalue {0:.3e})")]
    NotStrictlyFeasible(f64),
    #[error("flatness violated: rank H_d = {high}, rank H_(d-1) = {low}")]
    NotFlat { low: usize, high: usize },
    #[error("no separation: {0}")]
    NoSeparation(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
