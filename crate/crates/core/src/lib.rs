//! Numerical discovery of dynamical symmetries (`[H, A] = λA` with extensive,
//! site-local `A`) in small lattice Hamiltonians, the Lie-algebra machinery
//! that links them to conserved charges, and exact-diagonalization dynamics
//! that exposes the resulting non-stationary behaviour.

pub mod dynsym;
pub mod error;
pub mod evolve;
pub mod lie;
pub mod models;
mod linalg;
pub mod opalg;

pub use error::{Error, Result};
