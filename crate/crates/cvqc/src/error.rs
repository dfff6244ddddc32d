//! Error types shared across the simulator.

use thiserror::Error;

/// Errors emitted by state constructors, gate application and measurements.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A gate or measurement referenced a mode label that is not present.
    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    /// A gate was given the wrong number of target modes.
    #[error("gate `{gate}` expects {expected} target mode(s), got {got}")]
    GateArity {
        gate: &'static str,
        expected: usize,
        got: usize,
    },

    /// A non-Gaussian gate was sent to the Gaussian backend.
    #[error("gate `{0}` has no symplectic representation")]
    NonGaussianGate(&'static str),

    /// The conditioned quadrature has (numerically) zero variance.
    #[error("measured quadrature on `{mode}` has zero variance ({var:.3e})")]
    SingularQuadrature { mode: String, var: f64 },

    /// Measurement angles too close to a singular macronode configuration.
    #[error("singular macronode configuration: theta pair ({theta_a:.6}, {theta_b:.6})")]
    SingularConfiguration { theta_a: f64, theta_b: f64 },

    /// Parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// States have incompatible shapes or cutoffs.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A projection produced a numerically zero branch.
    #[error("measurement outcome has vanishing density: {0}")]
    ImpossibleOutcome(String),

    /// Underflow guard on conditional densities.
    #[error("density underflow ({density:.3e}); try a different outcome for `{context}`")]
    Underflow { context: String, density: f64 },

    /// Fock-space truncation leaked too much population.
    #[error("truncation leakage {leakage:.3e} exceeds limit {limit:.3e}; increase the cutoff")]
    LeakageTooLarge { leakage: f64, limit: f64 },

    /// Hybrid hand-off refused: too many live modes for the cutoff.
    #[error("hybrid hand-off of {modes} modes at cutoff {cutoff} exceeds the mode budget; reduce the cutoff or mode count")]
    ModeBudget { modes: usize, cutoff: usize },

    /// A schedule failed validation before execution.
    #[error("schedule step {step}: {msg}")]
    ScheduleValidation { step: usize, msg: String },

    /// Inputs, resources or instance files are inconsistent.
    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
