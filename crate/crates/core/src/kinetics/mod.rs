//! Kinetic evolution: collision kernel, Monte Carlo unraveling of the
//! diagonal, and banded coherence dynamics on a 1D grid.

pub mod band;
pub mod kernel;
pub mod mc;

pub use band::{
    band_evolve, covariance_test, lattice_histogram, maxwell_density, translate_band, BandGenerator,
    BandOperator, BandState, MomentumGrid1D,
};
pub use kernel::{CollisionKernel, KernelVariant};
pub use mc::{
    mc_evolve, splitmix64, trajectory_seed, DiagonalEnsemble, InitialCondition, McConfig,
    Recording, Trajectory,
};
