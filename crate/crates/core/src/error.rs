use thiserror::Error;

/// Errors raised by the analytic models and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A queue has no stationary distribution for the given rates.
    #[error("unstable queue: arrival rate {arrival} is not below service rate {service}")]
    Unstable { arrival: f64, service: f64 },

    /// A numerical routine failed to reach its accuracy target.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A boundary scan could not bracket the stability boundary.
    #[error("boundary scan failed to bracket the boundary ({0}); widen the grid")]
    WidenGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
