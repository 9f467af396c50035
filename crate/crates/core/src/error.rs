use thiserror::Error;

/// Errors produced across the planning, control and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid footstep plan: {0}")]
    Plan(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("level {level} inequalities are infeasible (max violation {violation:.3e})")]
    Infeasible { level: usize, violation: f64 },

    #[error("active-set solver did not converge after {0} iterations")]
    NotConverged(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation fault: {0}")]
    SimulationFault(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
