//! Numerical laboratory for Schrödinger operators `-Δ - ⟨x⟩^α + V` and
//! quadratic saddle Hamiltonians: exact Mehler propagation, split-step
//! evolution, classical flows, Cook-method scattering diagnostics and
//! phase-space commutator scans.

pub mod classical;
pub mod error;
pub mod fit;
pub mod grid;
pub mod mehler;
pub mod phasespace;
pub mod potentials;
pub mod scattering;
pub mod splitstep;

pub use error::{Error, Result};
pub use grid::{make_grid, BoundaryGuard, Grid, Observable, Representation, WaveFunction};
