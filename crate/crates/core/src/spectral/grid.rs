use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::spectral::fft::FftNd;

/// Integer wavevector; unused trailing components are zero in 2D.
pub type Wavevector = [i64; 3];

/// Uniform `N^n` grid on the torus `[0, 2pi)^n` together with its integer
/// wavevector lattice `{ j : -N/2 <= j_i < N/2 }`.
///
/// Storage order is the FFT order: axis 0 varies slowest, and index `i` on an
/// axis carries wavenumber `i` for `i < N/2` and `i - N` otherwise. Cloning is
/// cheap; the lattice tables and FFT plans are shared.
#[derive(Clone)]
pub struct SpectralGrid {
    inner: Arc<GridInner>,
}

struct GridInner {
    dim: usize,
    n: usize,
    len: usize,
    k2: Vec<f64>,
    fft: OnceLock<FftNd>,
}

impl SpectralGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::Grid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::Grid(format!("modes per axis must be even and >= 8, got {n}")));
        }
        let len = n.pow(dim as u32);
        let mut grid = GridInner {
            dim,
            n,
            len,
            k2: Vec::new(),
            fft: OnceLock::new(),
        };
        grid.k2 = (0..len)
            .map(|idx| {
                let j = wavevector_of(dim, n, idx);
                (j[0] * j[0] + j[1] * j[1] + j[2] * j[2]) as f64
            })
            .collect();
        Ok(Self { inner: Arc::new(grid) })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    /// Modes per axis `N`.
    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Number of lattice points, `N^n`.
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical grid spacing `2pi / N`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.inner.n as f64
    }

    /// Largest retained wavenumber per axis under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.inner.n / 3) as i64
    }

    pub fn wavevector(&self, idx: usize) -> Wavevector {
        wavevector_of(self.inner.dim, self.inner.n, idx)
    }

    /// `|j|^2` for the mode stored at `idx`.
    #[inline]
    pub fn k2(&self, idx: usize) -> f64 {
        self.inner.k2[idx]
    }

    pub fn k2_table(&self) -> &[f64] {
        &self.inner.k2
    }

    /// Storage index of wavevector `j`, or `None` if it lies outside the lattice.
    pub fn index_of(&self, j: &[i64]) -> Option<usize> {
        let n = self.inner.n as i64;
        if j.len() < self.inner.dim || j[self.inner.dim..].iter().any(|&c| c != 0) {
            return None;
        }
        let mut idx = 0usize;
        for &c in &j[..self.inner.dim] {
            if c < -n / 2 || c >= n / 2 {
                return None;
            }
            idx = idx * self.inner.n + c.rem_euclid(n) as usize;
        }
        Some(idx)
    }

    /// Index of `-j` (taken modulo `N`, so Nyquist wavenumbers map to themselves).
    #[inline]
    pub fn neg_index(&self, idx: usize) -> usize {
        let n = self.inner.n;
        let mut rest = idx;
        let mut out = 0usize;
        let mut stride = 1usize;
        for _ in 0..self.inner.dim {
            let i = rest % n;
            rest /= n;
            out += ((n - i) % n) * stride;
            stride *= n;
        }
        out
    }

    /// Whether every component of the mode satisfies `|j_i| <= N/3`.
    #[inline]
    pub fn is_retained(&self, idx: usize) -> bool {
        let cut = self.dealias_cutoff();
        let j = self.wavevector(idx);
        j.iter().all(|c| c.abs() <= cut)
    }

    /// Every storage index in lexicographic wavevector order
    /// (`j_1` slowest, each component ascending from `-N/2`).
    pub fn lexicographic_indices(&self) -> Vec<usize> {
        let n = self.inner.n;
        let dim = self.inner.dim;
        let mut out = Vec::with_capacity(self.inner.len);
        for lex in 0..self.inner.len {
            let mut rest = lex;
            let mut digits = [0usize; 3];
            for d in (0..dim).rev() {
                digits[d] = rest % n;
                rest /= n;
            }
            let mut idx = 0usize;
            for &digit in digits.iter().take(dim) {
                // digit 0 corresponds to wavenumber -N/2
                let k = digit as i64 - (n / 2) as i64;
                idx = idx * n + k.rem_euclid(n as i64) as usize;
            }
            out.push(idx);
        }
        out
    }

    pub(crate) fn fft(&self) -> &FftNd {
        self.inner.fft.get_or_init(|| FftNd::new(self.inner.dim, self.inner.n))
    }
}

fn wavevector_of(dim: usize, n: usize, idx: usize) -> Wavevector {
    let mut j = [0i64; 3];
    let mut rest = idx;
    for d in (0..dim).rev() {
        let i = rest % n;
        rest /= n;
        j[d] = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
    }
    j
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.dim == other.inner.dim && self.inner.n == other.inner.n
    }
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("dim", &self.inner.dim)
            .field("n", &self.inner.n)
            .finish()
    }
}
