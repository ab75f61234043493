//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A quantity that must be finite was NaN or infinite.
    #[error("non-finite value in `{quantity}`")]
    NonFinite { quantity: &'static str },

    #[error("invalid pulse schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),

    /// Adaptive step size fell below 1e-12 without meeting the tolerance.
    #[error("stiffness failure: step size underflow at T = {t}")]
    StiffnessFailure { t: f64 },

    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("eigensolver failure: {0}")]
    EigenFailure(String),

    #[error("unknown parameter path `{0}`")]
    UnknownParamPath(String),

    #[error("invalid sweep spec: {0}")]
    InvalidSweep(String),

    /// One or more sweep cells failed and permit-partial was not set.
    #[error("{} sweep cell(s) failed; first failure at {first_cell:?}: {first_error}", failed_cells.len())]
    SweepCellsFailed {
        failed_cells: Vec<[usize; 2]>,
        first_cell: [usize; 2],
        first_error: String,
    },

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("all optimizer starts failed:\n{diagnostics}")]
    AllStartsFailed { diagnostics: String },

    /// The best point did not reproduce its recorded observables on re-run.
    #[error("optimizer re-verification failed: {0}")]
    ReverifyFailed(String),
}
