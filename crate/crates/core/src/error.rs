use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside the closed domain: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("potential is singular at {0}")]
    SingularEvaluation(String),
    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,
    #[error("linear solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    Solver { residual: f64, iterations: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
