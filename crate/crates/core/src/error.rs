use thiserror::Error;

/// Errors surfaced by the estimation engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An ODE step or sweep produced NaN/inf; `time` is the simulated time
    /// (real-time axis) at which the value appeared.
    #[error("non-finite value in {what} at t = {time}")]
    NonFinite { what: String, time: f64 },

    /// The continuation residual grew past the configured divergence
    /// threshold. The real-time method has no recovery mechanism, so the
    /// run is aborted.
    #[error("continuation residual diverged at t = {time}: |F| = {f_norm:.3e}")]
    Diverged { time: f64, f_norm: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown-parameter set must be non-empty")]
    EmptyUnknownSet,

    /// The algebraic equilibrium has a negative infected-cell concentration;
    /// the only biologically meaningful fixed point is the infection-free one.
    #[error("infection-free regime: equilibrium infected-cell count is {x2}")]
    InfectedFreeRegime { x2: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("measurement table: {0}")]
    Measurement(String),
}

pub type Result<T> = std::result::Result<T, Error>;
