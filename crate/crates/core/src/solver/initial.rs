use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diophantine::BackgroundField;
use crate::error::{precondition, Error, Result};
use crate::spectral::{leray_project_in_place, sobolev_norm, SobolevIndex, SpectralGrid, SpectralVectorField};

/// Random divergence-free, mean-zero, real initial pair with Gaussian
/// coefficients of size `|j|^{-slope}` on the ball `|j| <= N/3`, scaled so
/// that `||v0||_{H^m} + ||b0||_{H^m} = epsilon`.
///
/// Coefficients are drawn in lexicographic wavevector order from a ChaCha8
/// stream seeded with `seed`, so the result depends only on the arguments.
pub fn make_initial_data(
    grid: &SpectralGrid,
    bf: &BackgroundField,
    m: u32,
    epsilon: f64,
    slope: f64,
    seed: u64,
) -> Result<(SpectralVectorField, SpectralVectorField)> {
    if grid.dim() != bf.dim() {
        return Err(Error::Dimension(format!(
            "grid dimension {} vs background dimension {}",
            grid.dim(),
            bf.dim()
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return precondition(format!("epsilon must be finite and >= 0, got {epsilon}"));
    }
    if !slope.is_finite() {
        return precondition("spectrum slope must be finite");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = grid.dealias_cutoff() as f64;
    let order = grid.lexicographic_indices();
    let mut draw = || {
        let mut f = SpectralVectorField::zeros(grid);
        for &idx in &order {
            let k2 = grid.k2(idx);
            if k2 == 0.0 || k2 > radius * radius {
                continue;
            }
            let amp = k2.powf(-0.5 * slope);
            for k in 0..grid.dim() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                f.component_mut(k)[idx] = Complex64::new(re, im) * amp;
            }
        }
        f.enforce_hermitian();
        leray_project_in_place(&mut f);
        f.zero_mean();
        f
    };
    let mut v = draw();
    let mut b = draw();

    let norm = SobolevIndex::inhomogeneous(m as f64);
    let total = sobolev_norm(&v, norm) + sobolev_norm(&b, norm);
    let scale = if total > 0.0 { epsilon / total } else { 0.0 };
    v.scale(scale);
    b.scale(scale);
    Ok((v, b))
}
