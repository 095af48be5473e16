//! Quantum error-mitigation toolbox: phase-free Pauli algebra, Pauli error
//! channels with exact inverses, quasi-probability sampling, an exact
//! density-matrix simulator with an error-count-resolved mode, Fermi-Hubbard
//! swap-network circuits, and extrapolation-based estimators with their
//! sampling-cost models.

pub mod channel;
pub mod error;
pub mod extrap;
pub mod fermi_hubbard;
pub mod pauli;
pub mod quasi;
pub mod sim;

pub use error::{Error, Result};
