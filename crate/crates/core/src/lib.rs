//! Quantum linear Boltzmann dynamics of a test particle in a gas.

pub mod brownian;
pub mod error;
pub mod friction;
pub mod kinetics;
pub mod physics;
pub mod quadrature;
pub mod stats;
pub mod structure_factor;
pub mod vec3;

pub use error::{Error, Result};
