use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The leading Hankel minor of the given order is not strictly positive.
    #[error("moments are not strictly realizable: Hankel minor of order {order} has pivot {pivot:e}")]
    NotRealizable { order: usize, pivot: f64 },

    /// EQMOM inversion could not reproduce the input moments.
    #[error("EQMOM inversion failed: {reason} (bracket [{lo:e}, {hi:e}], residual {residual:e})")]
    InversionFailed {
        reason: String,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    /// Root extraction did not converge.
    #[error("root finding did not converge: {reason}; residuals {residuals:?}")]
    RootFinding { reason: String, residuals: Vec<f64> },

    /// The operation is only defined on the equilibrium manifold.
    #[error("unsupported input: {0}")]
    Unsupported(String),

    /// Loss of realizability during a simulation.
    #[error("realizability lost in cell {cell} at t = {time}: moments {moments:?} ({reason})")]
    Realizability {
        cell: usize,
        time: f64,
        moments: Vec<f64>,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}
