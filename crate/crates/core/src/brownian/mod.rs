//! Diffusive (Brownian) limit: coefficients, Gaussian moment evolution and a
//! position-grid density-matrix integrator.

pub mod coefficients;
pub mod grid;
pub mod moments;

pub use coefficients::{coefficients, Coefficients, ThermalSpreads};
pub use grid::{
    evolve_grid, generator_bound, positivity_check, translation_covariance_grid, GridDensityMatrix,
    GridRun, GridSample, GridSchedule, PositionGrid,
};
pub use moments::{evolve_moments, GaussianState1D};
