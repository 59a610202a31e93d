//! Time-optimal conversion of a three-qubit W state into a GHZ state.
//!
//! The optimal pulses follow from a reduced system of ten real moduli that is
//! solved as a two-point boundary value problem by shooting. The crate also
//! reconstructs the complex pulses, propagates them through the full
//! four-level Schrödinger equation, compares the result with trapezoidal
//! dynamical-symmetry pulses and probes robustness to envelope distortions.

pub mod ds_baseline;
pub mod dynamics;
pub mod error;
pub mod export;
mod interp;
pub mod phases;
pub mod propagator;
pub mod robustness;
pub mod shooting;

pub use dynamics::{integrate, integrate_with, Integrator, ScaledState, Trajectory, XiGrid};
pub use error::{QbError, Result};
pub use phases::{derive_phases, to_physical, PhaseSet, PhysicalPulses};
pub use shooting::{InitialPoint, Method, Shooter, ShootingResult};
