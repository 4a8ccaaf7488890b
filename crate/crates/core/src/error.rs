use thiserror::Error;

/// Errors raised by certified operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{what} needs {required} elements but the budget is {budget}; use a coarser precision")]
    Budget {
        what: &'static str,
        required: u128,
        budget: u128,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("node data not Lipschitz-compatible between nodes {i} and {j} (coordinate {coord})")]
    Incompatible { i: usize, j: usize, coord: usize },

    #[error("trajectory left the state box at t = {time}")]
    DomainExit { time: f64 },

    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be positive, got {value}")))
    }
}
