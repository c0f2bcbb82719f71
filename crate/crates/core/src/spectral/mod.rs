//! Torus grids, Fourier-space vector fields, projection and multiplier
//! operators, and Sobolev norms.

mod fft;
mod field;
mod grid;
mod ops;

pub use field::{SobolevIndex, SpectralVectorField};
pub use grid::{SpectralGrid, Wavevector};
pub(crate) use ops::leray_project_in_place;
pub use ops::{
    dealias, forward_transform, inverse_transform, lambda_power, leray_project, pair_norm, sobolev_norm,
    sobolev_norm_sq,
};
