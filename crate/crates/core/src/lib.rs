//! Numerical laboratory for the damped-driven Maxwell–Bloch equations of a
//! single field mode coupled to a two-level molecule.
//!
//! The crate is layered bottom-up:
//!
//! - [`model`]: constants, pumping and state types.
//! - [`ode`]: Dormand–Prince 5(4) with dense output and classical RK4.
//! - [`full`]: the system on `R^2 x S^3`, with conservation monitors.
//! - [`reduction`]: Hopf projection, stereographic charts and the reduced flow.
//! - [`averaging`]: interaction picture, averaged fields and the order function.
//! - [`harmonic`]: stationary states of the averaged system and their spectra.
//! - [`experiments`]: p-sweeps for the asymptotic regimes.
//! - [`config`], [`output`]: configuration files and CSV/JSON emission.

pub mod averaging;
pub mod config;
pub mod experiments;
pub mod full;
pub mod harmonic;
pub mod model;
pub mod ode;
pub mod output;
pub mod reduction;

mod dop853;
mod error;

pub use error::{Error, Result};
pub use model::{
    BlochPoint, Chart, EnvelopeState, Harmonic, ModelConstants, PhysicalParams, Pumping, PureState, ReducedState,
};
pub use ode::{Method, SolverConfig, Trajectory};
