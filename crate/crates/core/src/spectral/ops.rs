use num_complex::Complex64;

use crate::error::{precondition, Error, Result};
use crate::spectral::field::{SobolevIndex, SpectralVectorField};
use crate::spectral::grid::SpectralGrid;

/// Transforms physical samples (one row-major `N^n` array per component,
/// sample `i` on each axis at `x = 2pi i / N`) into Fourier coefficients
/// `c(j) = N^{-n} sum_x v(x) exp(-i j.x)`, the discrete counterpart of
/// `(2pi)^{-n} int v exp(-i j.x) dx`.
pub fn forward_transform(grid: &SpectralGrid, samples: &[Vec<f64>]) -> Result<SpectralVectorField> {
    if samples.len() != grid.dim() {
        return Err(Error::Dimension(format!(
            "expected {} components, got {}",
            grid.dim(),
            samples.len()
        )));
    }
    let mut comps = Vec::with_capacity(samples.len());
    for (k, s) in samples.iter().enumerate() {
        if s.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "component {k} has {} samples, grid needs {}",
                s.len(),
                grid.len()
            )));
        }
        comps.push(real_to_spectral(grid, s));
    }
    SpectralVectorField::from_components(grid, comps)
}

/// Inverse of [`forward_transform`]: `v(x) = sum_j c(j) exp(i j.x)`, real part.
pub fn inverse_transform(f: &SpectralVectorField) -> Vec<Vec<f64>> {
    f.components().iter().map(|c| spectral_to_real(f.grid(), c)).collect()
}

pub(crate) fn real_to_spectral(grid: &SpectralGrid, samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    grid.fft().forward(&mut buf);
    let norm = 1.0 / grid.len() as f64;
    for z in &mut buf {
        *z *= norm;
    }
    buf
}

pub(crate) fn spectral_to_real(grid: &SpectralGrid, coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    grid.fft().inverse(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Helmholtz-Leray projection `c(j) -> (I - j j^T / |j|^2) c(j)`; the zero
/// mode is mapped to zero.
pub fn leray_project(f: &SpectralVectorField) -> SpectralVectorField {
    let mut out = f.clone();
    leray_project_in_place(&mut out);
    out
}

pub(crate) fn leray_project_in_place(f: &mut SpectralVectorField) {
    let grid = f.grid().clone();
    let dim = grid.dim();
    for idx in 0..grid.len() {
        if idx == 0 {
            for k in 0..dim {
                f.component_mut(k)[0] = Complex64::default();
            }
            continue;
        }
        let j = grid.wavevector(idx);
        let k2 = grid.k2(idx);
        let mut dot = Complex64::default();
        for k in 0..dim {
            dot += f.component(k)[idx] * j[k] as f64;
        }
        if dot == Complex64::default() {
            continue;
        }
        let factor = dot / k2;
        for k in 0..dim {
            f.component_mut(k)[idx] -= factor * j[k] as f64;
        }
    }
}

/// Fourier multiplier `|j|^s`. Negative orders require a mean-zero field;
/// the zero mode stays zero for every `s != 0`.
pub fn lambda_power(f: &SpectralVectorField, s: f64) -> Result<SpectralVectorField> {
    if s < 0.0 && !f.is_mean_zero() {
        return precondition("Lambda^s with s < 0 needs a mean-zero field");
    }
    let mut out = f.clone();
    if s == 0.0 {
        return Ok(out);
    }
    let grid = f.grid().clone();
    let half = 0.5 * s;
    for k in 0..grid.dim() {
        let comp = out.component_mut(k);
        comp[0] = Complex64::default();
        for (idx, c) in comp.iter_mut().enumerate().skip(1) {
            *c *= grid.k2(idx).powf(half);
        }
    }
    Ok(out)
}

/// Squared Sobolev norm `sum_j w(j) |c(j)|^2` without the `(2pi)^n` factor.
pub fn sobolev_norm_sq(f: &SpectralVectorField, idx: SobolevIndex) -> f64 {
    let grid = f.grid();
    let mut acc = 0.0;
    for comp in f.components() {
        for (i, c) in comp.iter().enumerate() {
            let a = c.norm_sqr();
            if a != 0.0 {
                acc += idx.weight(grid.k2(i)) * a;
            }
        }
    }
    acc
}

pub fn sobolev_norm(f: &SpectralVectorField, idx: SobolevIndex) -> f64 {
    sobolev_norm_sq(f, idx).sqrt()
}

/// Norm of the pair `(v, b)`: `sqrt(||v||^2 + ||b||^2)`.
pub fn pair_norm(v: &SpectralVectorField, b: &SpectralVectorField, idx: SobolevIndex) -> f64 {
    (sobolev_norm_sq(v, idx) + sobolev_norm_sq(b, idx)).sqrt()
}

/// 2/3-rule truncation: zeroes every mode with some `|j_i| > N/3`.
pub fn dealias(f: &SpectralVectorField) -> SpectralVectorField {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

pub(crate) fn dealias_in_place(f: &mut SpectralVectorField) {
    let grid = f.grid().clone();
    let keep: Vec<bool> = (0..grid.len()).map(|i| grid.is_retained(i)).collect();
    for k in 0..grid.dim() {
        for (c, &kept) in f.component_mut(k).iter_mut().zip(&keep) {
            if !kept {
                *c = Complex64::default();
            }
        }
    }
}
