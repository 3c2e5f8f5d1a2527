use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("instance too large for enumeration: {size} candidate plans exceed limit {limit}")]
    TooLarge { size: u128, limit: u128 },

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error("column generation did not converge after {iterations} master solves (best bound {best_bound})")]
    Convergence { iterations: usize, best_bound: f64 },

    #[error("pricing subproblem infeasible for content {content}")]
    PricingInfeasible { content: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than the solvers.
    pub fn is_user_error(&self) -> bool {
        matches!(self, Error::Param(_) | Error::Parse(_) | Error::Io(_) | Error::TooLarge { .. })
    }
}
