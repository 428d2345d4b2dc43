use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("derivative order {0} is not in 0..=3")]
    InvalidOrder(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("operator -Δ_h + V is not positive definite (pivot {pivot:e} at node {node})")]
    NotPositiveDefinite { node: usize, pivot: f64 },

    #[error("singular linear system at node {0}")]
    Singular(usize),

    #[error("no sign change found while bracketing {0}")]
    BracketNotFound(&'static str),

    #[error("requested Nehari branch {0} does not exist along this direction")]
    BranchAbsent(&'static str),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("iterate collapsed to the zero function")]
    Collapse,

    #[error("mass escape {0:.3} exceeds the allowed fraction")]
    MassEscape(f64),

    #[error("solver left the {expected} branch: {detail}")]
    WrongBranch { expected: &'static str, detail: String },

    #[error("config error for key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
