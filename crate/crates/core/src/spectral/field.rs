use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::grid::{SpectralGrid, Wavevector};

/// Fourier coefficients of an `n`-component vector field on the torus.
///
/// `component(k)[idx]` is the coefficient of Cartesian component `k` at the
/// lattice point stored at `idx` (see [`SpectralGrid`] for the ordering).
/// A real physical field has Hermitian-symmetric coefficients; that property,
/// the zero mean and the divergence constraint are checked through the
/// residual methods rather than assumed.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVectorField {
    grid: SpectralGrid,
    comps: Vec<Vec<Complex64>>,
}

impl SpectralVectorField {
    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self {
            grid: grid.clone(),
            comps: vec![vec![Complex64::default(); grid.len()]; grid.dim()],
        }
    }

    pub fn from_components(grid: &SpectralGrid, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        if comps.len() != grid.dim() || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Dimension(format!(
                "expected {} components of length {}",
                grid.dim(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            comps,
        })
    }

    /// Builds a field by evaluating `f` at every lattice point.
    pub fn from_fn(grid: &SpectralGrid, mut f: impl FnMut(Wavevector) -> [Complex64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let c = f(grid.wavevector(idx));
            for (k, comp) in out.comps.iter_mut().enumerate() {
                comp[idx] = c[k];
            }
        }
        out
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, k: usize) -> &[Complex64] {
        &self.comps[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.comps[k]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<Complex64>> {
        self.comps
    }

    /// Coefficient vector at storage index `idx`.
    #[inline]
    pub fn at(&self, idx: usize) -> [Complex64; 3] {
        let mut out = [Complex64::default(); 3];
        for (k, comp) in self.comps.iter().enumerate() {
            out[k] = comp[idx];
        }
        out
    }

    /// Coefficient vector at wavevector `j`, if `j` lies on the lattice.
    pub fn coeff(&self, j: &[i64]) -> Option<[Complex64; 3]> {
        self.grid.index_of(j).map(|idx| self.at(idx))
    }

    pub fn set_coeff(&mut self, j: &[i64], value: &[Complex64]) -> Result<()> {
        let idx = self
            .grid
            .index_of(j)
            .ok_or_else(|| Error::Dimension(format!("wavevector {j:?} outside the lattice")))?;
        for (k, comp) in self.comps.iter_mut().enumerate() {
            comp[idx] = value.get(k).copied().unwrap_or_default();
        }
        Ok(())
    }

    /// Sets `coeff(j) = value` and `coeff(-j) = conj(value)`.
    pub fn set_mode_pair(&mut self, j: &[i64], value: &[Complex64]) -> Result<()> {
        self.set_coeff(j, value)?;
        let neg: Vec<i64> = j.iter().map(|c| -c).collect();
        let conj: Vec<Complex64> = value.iter().map(|c| c.conj()).collect();
        if self.grid.index_of(&neg).is_some() {
            self.set_coeff(&neg, &conj)?;
        }
        Ok(())
    }

    /// Zero-mode coefficient (the spatial mean).
    pub fn mean(&self) -> [Complex64; 3] {
        self.at(0)
    }

    pub fn is_mean_zero(&self) -> bool {
        self.comps.iter().all(|c| c[0] == Complex64::default())
    }

    pub fn zero_mean(&mut self) {
        for comp in &mut self.comps {
            comp[0] = Complex64::default();
        }
    }

    /// Largest magnitude of the zero-mode coefficient.
    pub fn mean_residual(&self) -> f64 {
        self.comps.iter().map(|c| c[0].norm()).fold(0.0, f64::max)
    }

    /// `max_j |c(-j) - conj(c(j))| / max_j |c(j)|`; zero for a real field.
    pub fn hermitian_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for comp in &self.comps {
            for (idx, c) in comp.iter().enumerate() {
                scale = scale.max(c.norm());
                let partner = comp[self.grid.neg_index(idx)];
                worst = worst.max((partner - c.conj()).norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Replaces each coefficient by the average of itself and the conjugate of
    /// its partner, making the symmetry exact.
    pub fn enforce_hermitian(&mut self) {
        let grid = self.grid.clone();
        for comp in &mut self.comps {
            for idx in 0..comp.len() {
                let m = grid.neg_index(idx);
                if m < idx {
                    continue;
                }
                let avg = (comp[idx] + comp[m].conj()) * 0.5;
                comp[idx] = avg;
                comp[m] = avg.conj();
            }
        }
    }

    /// Relative divergence residual `||j . c|| / || |j| c ||` over all modes.
    pub fn div_residual(&self) -> f64 {
        let mut div2 = 0.0;
        let mut norm2 = 0.0;
        for idx in 0..self.grid.len() {
            let j = self.grid.wavevector(idx);
            let mut d = Complex64::default();
            for (k, comp) in self.comps.iter().enumerate() {
                d += comp[idx] * j[k] as f64;
                norm2 += self.grid.k2(idx) * comp[idx].norm_sqr();
            }
            div2 += d.norm_sqr();
        }
        if norm2 == 0.0 {
            0.0
        } else {
            (div2 / norm2).sqrt()
        }
    }

    /// Largest `|j|` over modes with a nonzero coefficient.
    pub fn support_radius(&self) -> f64 {
        let mut r2: f64 = 0.0;
        for idx in 0..self.grid.len() {
            if self.comps.iter().any(|c| c[idx] != Complex64::default()) {
                r2 = r2.max(self.grid.k2(idx));
            }
        }
        r2.sqrt()
    }

    pub fn scale(&mut self, alpha: f64) {
        for comp in &mut self.comps {
            for c in comp.iter_mut() {
                *c *= alpha;
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y * alpha;
            }
        }
    }

    /// Largest absolute coefficient difference relative to the largest
    /// coefficient of `other`.
    pub fn max_rel_diff(&self, other: &Self) -> f64 {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for (x, y) in a.iter().zip(b) {
                diff = diff.max((x - y).norm());
                scale = scale.max(y.norm());
            }
        }
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// Order of a Sobolev norm, homogeneous (`|j|^{2s}` weight) or not.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SobolevIndex {
    pub s: f64,
    pub homogeneous: bool,
}

impl SobolevIndex {
    pub fn homogeneous(s: f64) -> Self {
        Self { s, homogeneous: true }
    }

    pub fn inhomogeneous(s: f64) -> Self {
        Self { s, homogeneous: false }
    }

    /// Squared-norm weight of a mode with `|j|^2 = k2`.
    ///
    /// Inhomogeneous integer orders `s >= 0` use `sum_{l=0..s} |j|^{2l}`;
    /// other inhomogeneous orders use `(1 + |j|^2)^s`. The homogeneous
    /// weight of the zero mode is `1` at `s = 0`, `0` for `s > 0` and
    /// infinite for `s < 0`.
    #[inline]
    pub fn weight(&self, k2: f64) -> f64 {
        if self.homogeneous {
            if k2 == 0.0 {
                return if self.s == 0.0 {
                    1.0
                } else if self.s > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
            }
            k2.powf(self.s)
        } else if self.s >= 0.0 && self.s.fract() == 0.0 {
            let mut acc = 1.0;
            let mut p = 1.0;
            for _ in 0..self.s as u32 {
                p *= k2;
                acc += p;
            }
            acc
        } else {
            (1.0 + k2).powf(self.s)
        }
    }

    pub fn label(&self) -> String {
        if self.homogeneous {
            format!("Hdot{}", self.s)
        } else {
            format!("H{}", self.s)
        }
    }
}
