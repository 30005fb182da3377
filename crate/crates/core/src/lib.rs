//! Solitary gravity–capillary waves with constant vorticity, computed as
//! minimizers of the reduced energy functional on a spectral strip discretization.

pub mod asymptotics;
pub mod chebyshev;
pub mod dispersion;
pub mod error;
pub mod functionals;
pub mod minimizer;
pub mod spectral;
pub mod strip;

pub use error::{Error, Result};
