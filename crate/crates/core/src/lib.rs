//! Pseudo-spectral simulation and numerical verification for the
//! incompressible ideal MHD system with velocity damping on the torus
//! `T^n`, linearized around a constant Diophantine background field.

pub mod diagnostics;
pub mod diophantine;
pub mod error;
pub mod kernels;
pub mod propagator;
pub mod runner;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
