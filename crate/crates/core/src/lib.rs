//! Inverse engineering of time-dependent quantum drives.
//!
//! Given a prescribed trajectory of a basic observable (on-site densities,
//! link currents, Bloch angles, continuum densities or currents) and an
//! initial state, the maps in this crate return the conjugate driving signal
//! (on-site potentials, complex hoppings, in-plane magnetic-field pulses,
//! scalar or vector potentials) together with the closed-form wavefunction.
//! An independent forward propagator certifies every reconstruction.

pub mod chain;
pub mod error;
pub mod field;
pub mod grid;
pub mod lattice;
pub mod math;
pub mod propagate;
pub mod realspace;
pub mod spin;
pub mod state;

pub use error::{PulseError, Result};
pub use grid::{central_diff, trapezoid_integrate, TimeGrid, TimeSeries};
pub use state::{GridWavefunction1D, LatticeWavefunction, SpatialGrid1D};
