use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: {diagnostic}")]
    Quadrature {
        lo: f64,
        hi: f64,
        diagnostic: String,
    },

    #[error("integral diverges (increment stalled over {rounds} rounds)")]
    Divergent { rounds: u32 },

    #[error("no stationary density: total speed measure is not finite")]
    NoStationaryDensity,

    #[error("criterion inapplicable: {0}")]
    Inapplicable(String),

    #[error("series divergence suspected: tail envelope {envelope:e} still above tolerance after {terms} terms")]
    DivergenceSuspected { terms: u64, envelope: f64 },

    #[error("observable violates its declared sup norm {declared} at x = {x} (|f(x)| = {value})")]
    SupNormViolated { declared: f64, x: f64, value: f64 },

    #[error("simulation failed on path {path}: {reason}")]
    Simulation { path: u64, reason: String },

    #[error("invalid model description: {0}")]
    Model(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
