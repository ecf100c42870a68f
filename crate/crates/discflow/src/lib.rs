//! Prescribed Gauss and geodesic curvature flow on the unit disc.
//!
//! The flow evolves a conformal factor `u` of the metric `e^{2u}|dz|^2` and a
//! scalar `rho` splitting the Gauss–Bonnet budget between the interior and the
//! boundary. Alongside the integrator the crate provides the spectral grid,
//! the Möbius group of the disc, spherical-cap reference solutions, Steklov
//! spectra, center-of-mass tracking and the diagnostics used to check the
//! flow's identities numerically.

pub mod cap;
pub mod checks;
pub mod cli;
pub mod config;
pub mod conformal;
pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod flow;
pub mod grid;
pub mod model;
pub mod normalize;
pub mod random;
pub mod shadow;

pub use error::{Error, Result};
