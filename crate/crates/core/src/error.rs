use alloc::string::String;

/// Errors raised by the simulation kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("quadrature did not converge on [{lo}, {hi}]")]
    QuadratureNonConvergence { lo: f64, hi: f64 },
    #[error("membrane window exhausted at index {index} (capacity {capacity})")]
    WindowExhausted { index: i64, capacity: i64 },
    #[error("smallness violated: epsilon * |beta| = {product} exceeds {limit}")]
    Smallness { product: f64, limit: f64 },
    #[error("Newton inverse did not converge at u = {u} (residual {residual:e})")]
    NewtonNonConvergence { u: f64, residual: f64 },
    #[error("strip exit horizon exhausted after t = {elapsed}")]
    HorizonExhausted { elapsed: f64 },
    #[error("state left the spatial box at t = {time}")]
    SpatialBoxExit { time: f64 },
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    Domain(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
