//! Simulation and pulse-schedule optimization for three-pulse coherent
//! control of molecular photodissociation through two laser-induced
//! continuum structures (LICS).
//!
//! Three bound levels `m`, `n`, `f` couple to a common dissociation
//! continuum: a one-photon field drives `m`–`n`, and two further fields
//! embed `n` and `f` into the continuum, producing a pair of interfering
//! continuum structures. The crate propagates the reduced three-amplitude
//! equations with an accumulated dissociation yield `W`, evaluates Gaussian
//! pulse schedules, ships named presets of the model's operating points,
//! and layers deterministic parameter sweeps and a derivative-free
//! schedule optimizer on top.
//!
//! Entry points:
//! - [`dynamics::integrate`] — adaptive propagation of one schedule,
//! - [`scenarios::preset`] — named operating points (`fig2`, `fig5`, ...),
//! - [`sweep::run_sweep`] — deterministic 1D/2D grids of final observables,
//! - [`optimize::optimize`] — multi-start simplex search over schedule
//!   parameters for a target population/yield split.

pub mod dynamics;
pub mod error;
mod linalg;
pub mod optimize;
pub mod pulses;
pub mod scenarios;
pub mod sweep;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
