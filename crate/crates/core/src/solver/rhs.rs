//! Quadratic terms `N1 = P(v.grad v - b.grad b)` and `N2 = v.grad b - b.grad v`.
//!
//! Both are evaluated in divergence form, `N1_k = P sum_l d_l (v_l v_k - b_l
//! b_k)` and `N2_k = sum_l d_l (v_l b_k - b_l v_k)`, which equals the
//! advective form for divergence-free fields. Products are taken in physical
//! space from 2/3-truncated inputs and truncated again afterwards, so the
//! result is the exact Galerkin projection of the quadratic terms. Two real
//! fields share each complex FFT.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{leray_project_in_place, SpectralGrid, SpectralVectorField};

pub(crate) struct Nonlinearity {
    grid: SpectralGrid,
    /// Per-mode 2/3-rule mask; all true when dealiasing is disabled.
    keep: Vec<bool>,
}

/// `N1`, `N2` and the sup norms `(max |v|, max |b|)` over the physical grid.
pub(crate) struct RhsEval {
    pub n1: SpectralVectorField,
    pub n2: SpectralVectorField,
    pub vmax: f64,
    pub bmax: f64,
}

impl Nonlinearity {
    pub fn new(grid: &SpectralGrid, dealias: bool) -> Self {
        let keep = (0..grid.len()).map(|idx| !dealias || grid.is_retained(idx)).collect();
        Self {
            grid: grid.clone(),
            keep,
        }
    }

    pub fn eval(&self, v: &SpectralVectorField, b: &SpectralVectorField) -> Result<RhsEval> {
        let grid = &self.grid;
        let dim = grid.dim();

        let mut spectral: Vec<&[Complex64]> = Vec::with_capacity(2 * dim);
        for k in 0..dim {
            spectral.push(v.component(k));
        }
        for k in 0..dim {
            spectral.push(b.component(k));
        }
        let physical = self.to_physical(&spectral);
        let (vp, bp) = physical.split_at(dim);

        let speed = |fields: &[Vec<f64>]| {
            (0..grid.len())
                .map(|i| fields.iter().map(|f| f[i] * f[i]).sum::<f64>())
                .fold(0.0f64, f64::max)
                .sqrt()
        };
        let vmax = speed(vp);
        let bmax = speed(bp);
        if !(vmax.is_finite() && bmax.is_finite()) {
            return Err(Error::BlowUp {
                t: f64::NAN,
                step: 0,
                reason: "non-finite values in physical fields".into(),
            });
        }

        // symmetric T_lk = v_l v_k - b_l b_k (l <= k), antisymmetric
        // A_lk = v_l b_k - b_l v_k (l < k)
        let mut sym_pairs = Vec::new();
        let mut anti_pairs = Vec::new();
        for l in 0..dim {
            for k in l..dim {
                sym_pairs.push((l, k));
                if k > l {
                    anti_pairs.push((l, k));
                }
            }
        }
        let mut products: Vec<Vec<f64>> = Vec::with_capacity(sym_pairs.len() + anti_pairs.len());
        for &(l, k) in &sym_pairs {
            products.push(
                (0..grid.len())
                    .into_par_iter()
                    .map(|i| vp[l][i] * vp[k][i] - bp[l][i] * bp[k][i])
                    .collect(),
            );
        }
        for &(l, k) in &anti_pairs {
            products.push(
                (0..grid.len())
                    .into_par_iter()
                    .map(|i| vp[l][i] * bp[k][i] - bp[l][i] * vp[k][i])
                    .collect(),
            );
        }
        let hats = self.to_spectral(&products);
        let (t_hat, a_hat) = hats.split_at(sym_pairs.len());

        let sym_index = |l: usize, k: usize| {
            let (l, k) = if l <= k { (l, k) } else { (k, l) };
            sym_pairs.iter().position(|&p| p == (l, k)).unwrap()
        };
        let anti_index = |l: usize, k: usize| -> (usize, f64) {
            if l < k {
                (anti_pairs.iter().position(|&p| p == (l, k)).unwrap(), 1.0)
            } else {
                (anti_pairs.iter().position(|&p| p == (k, l)).unwrap(), -1.0)
            }
        };

        let mut n1 = SpectralVectorField::zeros(grid);
        let mut n2 = SpectralVectorField::zeros(grid);
        let i = Complex64::i();
        for k in 0..dim {
            let t_cols: Vec<&Vec<Complex64>> = (0..dim).map(|l| &t_hat[sym_index(l, k)]).collect();
            let a_cols: Vec<(&Vec<Complex64>, f64)> = (0..dim)
                .filter(|&l| l != k)
                .map(|l| {
                    let (pos, sign) = anti_index(l, k);
                    (&a_hat[pos], sign)
                })
                .collect();
            let a_dirs: Vec<usize> = (0..dim).filter(|&l| l != k).collect();
            let out1 = n1.component_mut(k);
            for (idx, slot) in out1.iter_mut().enumerate() {
                if !self.keep[idx] {
                    continue;
                }
                let j = grid.wavevector(idx);
                let mut acc = Complex64::default();
                for (l, col) in t_cols.iter().enumerate() {
                    acc += col[idx] * j[l] as f64;
                }
                *slot = i * acc;
            }
            let out2 = n2.component_mut(k);
            for (idx, slot) in out2.iter_mut().enumerate() {
                if !self.keep[idx] {
                    continue;
                }
                let j = grid.wavevector(idx);
                let mut acc = Complex64::default();
                for ((col, sign), &l) in a_cols.iter().zip(&a_dirs) {
                    acc += col[idx] * (sign * j[l] as f64);
                }
                *slot = i * acc;
            }
        }
        leray_project_in_place(&mut n1);
        Ok(RhsEval { n1, n2, vmax, bmax })
    }

    /// Inverse transforms of truncated Hermitian spectra, two per complex FFT.
    fn to_physical(&self, spectra: &[&[Complex64]]) -> Vec<Vec<f64>> {
        let grid = &self.grid;
        let mut out = vec![Vec::new(); spectra.len()];
        let chunks: Vec<(usize, Option<usize>)> = (0..spectra.len())
            .step_by(2)
            .map(|a| (a, (a + 1 < spectra.len()).then_some(a + 1)))
            .collect();
        let results: Vec<(Vec<f64>, Option<Vec<f64>>)> = chunks
            .par_iter()
            .map(|&(a, b)| {
                let mut buf: Vec<Complex64> = (0..grid.len())
                    .map(|idx| {
                        if !self.keep[idx] {
                            return Complex64::default();
                        }
                        let re = spectra[a][idx];
                        match b {
                            Some(b) => re + Complex64::i() * spectra[b][idx],
                            None => re,
                        }
                    })
                    .collect();
                grid.fft().inverse(&mut buf);
                let first = buf.iter().map(|z| z.re).collect();
                let second = b.map(|_| buf.iter().map(|z| z.im).collect());
                (first, second)
            })
            .collect();
        for (&(a, b), (first, second)) in chunks.iter().zip(results) {
            out[a] = first;
            if let (Some(b), Some(second)) = (b, second) {
                out[b] = second;
            }
        }
        out
    }

    /// Forward transforms of real fields, two per complex FFT, separated by
    /// Hermitian symmetry and truncated.
    fn to_spectral(&self, fields: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
        let grid = &self.grid;
        let norm = 1.0 / grid.len() as f64;
        let chunks: Vec<(usize, Option<usize>)> = (0..fields.len())
            .step_by(2)
            .map(|a| (a, (a + 1 < fields.len()).then_some(a + 1)))
            .collect();
        let results: Vec<(Vec<Complex64>, Option<Vec<Complex64>>)> = chunks
            .par_iter()
            .map(|&(a, b)| {
                let mut buf: Vec<Complex64> = match b {
                    Some(b) => fields[a]
                        .iter()
                        .zip(&fields[b])
                        .map(|(&x, &y)| Complex64::new(x, y))
                        .collect(),
                    None => fields[a].iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                };
                grid.fft().forward(&mut buf);
                let mut first = vec![Complex64::default(); grid.len()];
                let mut second = b.map(|_| vec![Complex64::default(); grid.len()]);
                for idx in 0..grid.len() {
                    if !self.keep[idx] {
                        continue;
                    }
                    let z = buf[idx] * norm;
                    let w = buf[grid.neg_index(idx)].conj() * norm;
                    match second.as_mut() {
                        Some(second) => {
                            first[idx] = (z + w) * 0.5;
                            second[idx] = (z - w) * Complex64::new(0.0, -0.5);
                        }
                        None => first[idx] = z,
                    }
                }
                (first, second)
            })
            .collect();
        let mut out = vec![Vec::new(); fields.len()];
        for (&(a, b), (first, second)) in chunks.iter().zip(results) {
            out[a] = first;
            if let (Some(b), Some(second)) = (b, second) {
                out[b] = second;
            }
        }
        out
    }
}

/// `(N1, N2)` for the state's fields, with 2/3-rule dealiasing.
pub fn nonlinear_rhs(state: &super::SimulationState) -> Result<(SpectralVectorField, SpectralVectorField)> {
    let eval = Nonlinearity::new(state.grid(), true).eval(&state.v, &state.b)?;
    Ok((eval.n1, eval.n2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::{estimate_constant, preset_vector};
    use crate::solver::{make_initial_data, SimulationState};

    fn state(n: usize, seed: u64) -> SimulationState {
        let grid = SpectralGrid::new(2, n).unwrap();
        let bf = estimate_constant(&preset_vector("sqrt2").unwrap(), 1.0, 8).unwrap();
        let (v, b) = make_initial_data(&grid, &bf, 2, 0.3, 2.0, seed).unwrap();
        SimulationState::new(v, b, bf).unwrap()
    }

    #[test]
    fn zero_fields_give_zero() {
        let s = state(16, 1);
        let zero = SimulationState::zeros(s.grid(), s.bf.clone()).unwrap();
        let (n1, n2) = nonlinear_rhs(&zero).unwrap();
        assert!(n1.components().iter().flatten().all(|c| c.norm() == 0.0));
        assert!(n2.components().iter().flatten().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn equal_fields_cancel_exactly() {
        let mut s = state(16, 2);
        s.b = s.v.clone();
        let (n1, n2) = nonlinear_rhs(&s).unwrap();
        assert!(n1.components().iter().flatten().all(|c| c.norm() == 0.0));
        assert!(n2.components().iter().flatten().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn outputs_are_mean_zero_hermitian_and_solenoidal() {
        let s = state(32, 3);
        let (n1, n2) = nonlinear_rhs(&s).unwrap();
        assert!(n1.is_mean_zero() && n2.is_mean_zero());
        assert_eq!(n1.hermitian_residual(), 0.0);
        assert_eq!(n2.hermitian_residual(), 0.0);
        assert!(n1.div_residual() < 1e-14);
        assert!(n2.div_residual() < 1e-13);
    }

    #[test]
    fn energy_flux_vanishes() {
        // <v, N1> + <b, N2> = 0 for the truncated system
        let s = state(32, 4);
        let (n1, n2) = nonlinear_rhs(&s).unwrap();
        let mut flux = 0.0;
        let mut scale = 0.0;
        for k in 0..2 {
            for idx in 0..s.grid().len() {
                flux += (s.v.component(k)[idx].conj() * n1.component(k)[idx]).re;
                flux += (s.b.component(k)[idx].conj() * n2.component(k)[idx]).re;
                scale += s.v.component(k)[idx].norm() * n1.component(k)[idx].norm();
            }
        }
        assert!(flux.abs() < 1e-14 * scale.max(1e-300), "{flux} vs {scale}");
    }
}
