//! Desk-scale numerical laboratory for the radial fractional p-Laplacian
//! with a Hardy-type singular potential.
//!
//! The crate computes the sharp Hardy constant and related variational
//! quantities by singular quadrature, builds self-similar solutions, runs
//! radial nonlocal evolutions with truncated potentials, and property-tests
//! the algebraic inequalities behind the energy estimates.

pub mod constants;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod grid;
pub mod inequality;
pub mod kernel;
pub mod norms;
pub mod operator;
pub mod params;
pub mod quad;
pub mod report;

pub use error::{Error, Result};
pub use params::Params;
