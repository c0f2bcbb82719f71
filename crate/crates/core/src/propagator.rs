//! Exact per-mode solution of the linearized damped MHD system.
//!
//! For each wavevector the pair `(v(j), b(j))` obeys `d/dt psi = -Q psi` with
//! `Q = [[1, -i theta], [-i theta, 0]]`, `theta = b.j`, acting identically on
//! every Cartesian component. Writing `Q = I/2 + N` with `N^2 = (1/4 -
//! theta^2) I`, the exponential is
//!
//! ```text
//! exp(-Q t) = exp(-t/2) [ cosh(dt) I - sinh(dt)/d N ],   d^2 = 1/4 - theta^2,
//! ```
//!
//! which is real on the diagonal and purely imaginary off it. The scalar
//! `exp(-t/2) sinh(dt)/d` is the kernel `G(t) = (exp(-l2 t) - exp(-l1 t)) /
//! (l1 - l2)`; its degenerate limit is `t exp(-t/2)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::diophantine::BackgroundField;
use crate::error::{precondition, Error, Result};
use crate::spectral::{SobolevIndex, SpectralGrid, SpectralVectorField, Wavevector};

/// Below this eigenvalue gap the divided difference switches to its series.
pub const DEGENERATE_GAP: f64 = 1e-8;

/// Frequency-space region by the discriminant `1 - 4 theta^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// `1 - 4 theta^2 <= 0`: complex pair with real part 1/2.
    S1,
    /// `0 < 1 - 4 theta^2 <= 1/4`.
    S2,
    /// `1 - 4 theta^2 > 1/4`: slow rate `lambda2 ~ theta^2`.
    S3,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::S1, Region::S2, Region::S3];

    pub fn of_theta(theta: f64) -> Self {
        let disc = discriminant(theta);
        if disc <= 0.0 {
            Region::S1
        } else if disc <= 0.25 {
            Region::S2
        } else {
            Region::S3
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Region::S1 => "S1",
            Region::S2 => "S2",
            Region::S3 => "S3",
        }
    }
}

/// `1 - 4 theta^2`, factored to stay accurate near `|theta| = 1/2`.
#[inline]
fn discriminant(theta: f64) -> f64 {
    let a = theta.abs();
    (1.0 - 2.0 * a) * (1.0 + 2.0 * a)
}

/// Eigen data of the per-mode matrix `Q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeDecomposition {
    pub j: Wavevector,
    pub theta: f64,
    /// `(1 + sqrt(1 - 4 theta^2)) / 2`, principal root.
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub region: Region,
    pub discriminant: f64,
}

impl ModeDecomposition {
    /// Decomposition for a bare `theta`; `j` is left at zero.
    pub fn from_theta(theta: f64) -> Self {
        let disc = discriminant(theta);
        let (lambda1, lambda2) = if disc < 0.0 {
            let w = 0.5 * (-disc).sqrt();
            (Complex64::new(0.5, w), Complex64::new(0.5, -w))
        } else {
            let l1 = 0.5 * (1.0 + disc.sqrt());
            // product form avoids cancellation in 1/2 - d for small theta
            (Complex64::new(l1, 0.0), Complex64::new(theta * theta / l1, 0.0))
        };
        Self {
            j: [0; 3],
            theta,
            lambda1,
            lambda2,
            region: Region::of_theta(theta),
            discriminant: disc,
        }
    }

    /// `|lambda1 - lambda2| = sqrt(|1 - 4 theta^2|)`.
    pub fn gap(&self) -> f64 {
        self.discriminant.abs().sqrt()
    }

    pub fn is_degenerate(&self) -> bool {
        self.gap() < DEGENERATE_GAP
    }
}

pub fn decompose_mode(j: &Wavevector, bf: &BackgroundField) -> Result<ModeDecomposition> {
    if j.iter().all(|&c| c == 0) {
        return precondition("mode decomposition is undefined at j = 0");
    }
    if j[bf.dim()..].iter().any(|&c| c != 0) {
        return Err(Error::Dimension(format!(
            "wavevector {j:?} has more components than the {}-dimensional background",
            bf.dim()
        )));
    }
    let mut md = ModeDecomposition::from_theta(bf.dot(j));
    md.j = *j;
    Ok(md)
}

/// `exp(-Q t)` in the form `[[p, i q], [i q, r]]` with real `p, q, r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Propagator {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl Propagator {
    pub const IDENTITY: Propagator = Propagator { p: 1.0, q: 0.0, r: 1.0 };

    /// Closed-form `exp(-Q t)` for `t >= 0` (not checked).
    pub fn new(theta: f64, t: f64) -> Self {
        closed_form(theta, t).0
    }

    #[inline]
    pub fn apply(&self, v: Complex64, b: Complex64) -> (Complex64, Complex64) {
        let i = Complex64::i();
        (v * self.p + i * self.q * b, i * self.q * v + b * self.r)
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let off = Complex64::new(0.0, self.q);
        [[Complex64::new(self.p, 0.0), off], [off, Complex64::new(self.r, 0.0)]]
    }

    pub fn det(&self) -> f64 {
        self.p * self.r + self.q * self.q
    }
}

/// `exp(-Q t)` together with the kernel `G(t) = exp(-t/2) sinh(dt)/d`,
/// `d^2 = 1/4 - theta^2`, continued analytically through `d = 0` and to
/// imaginary `d`.
fn closed_form(theta: f64, t: f64) -> (Propagator, f64) {
    let a = theta.abs();
    let d2 = (0.5 - a) * (0.5 + a);
    let damp = (-0.5 * t).exp();
    let assemble = |c: f64, s: f64| Propagator {
        p: c - 0.5 * s,
        q: theta * s,
        r: c + 0.5 * s,
    };
    let gap = 2.0 * d2.abs().sqrt();
    if gap < DEGENERATE_GAP {
        let x = d2 * t * t;
        let c = damp * (1.0 + x / 2.0 + x * x / 24.0);
        let s = damp * t * (1.0 + x / 6.0 + x * x / 120.0);
        return (assemble(c, s), s);
    }
    if d2 < 0.0 {
        let w = ((a - 0.5) * (a + 0.5)).sqrt();
        let (sn, cs) = (w * t).sin_cos();
        let s = damp * sn / w;
        return (assemble(damp * cs, s), s);
    }
    let d = d2.sqrt();
    if d * t <= 1.0 {
        let s = damp * (d * t).sinh() / d;
        return (assemble(damp * (d * t).cosh(), s), s);
    }
    // wide real split: build from the two exponentials directly
    let l1 = 0.5 + d;
    let l2 = theta * theta / l1;
    let e1 = (-l1 * t).exp();
    let e2 = (-l2 * t).exp();
    let s = (e2 - e1) / (2.0 * d);
    let prop = Propagator {
        p: (l1 * e1 - l2 * e2) / (2.0 * d),
        q: theta * s,
        r: (l1 * e2 - l2 * e1) / (2.0 * d),
    };
    (prop, s)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return precondition(format!("time must be finite and >= 0, got {t}"));
    }
    Ok(())
}

/// `exp(-Q t)` for the mode.
pub fn propagator_matrix(md: &ModeDecomposition, t: f64) -> Result<[[Complex64; 2]; 2]> {
    check_time(t)?;
    Ok(Propagator::new(md.theta, t).matrix())
}

/// Per-mode propagators over the whole lattice, in storage order. The zero
/// mode gets the identity; callers keep it at zero anyway.
pub(crate) fn propagator_table(grid: &SpectralGrid, bf: &BackgroundField, t: f64) -> Vec<Propagator> {
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            if idx == 0 {
                Propagator::IDENTITY
            } else {
                Propagator::new(bf.dot(&grid.wavevector(idx)), t)
            }
        })
        .collect()
}

/// Applies a propagator table to `(v, b)` in place.
pub(crate) fn apply_table(table: &[Propagator], v: &mut SpectralVectorField, b: &mut SpectralVectorField) {
    for k in 0..v.dim() {
        v.component_mut(k)
            .par_iter_mut()
            .zip(b.component_mut(k).par_iter_mut())
            .zip(table.par_iter())
            .for_each(|((x, y), prop)| {
                let (nx, ny) = prop.apply(*x, *y);
                *x = nx;
                *y = ny;
            });
    }
}

fn check_pair(v: &SpectralVectorField, b: &SpectralVectorField, bf: &BackgroundField) -> Result<()> {
    if v.grid() != b.grid() {
        return Err(Error::Dimension(
            "velocity and magnetic fields live on different grids".into(),
        ));
    }
    if v.grid().dim() != bf.dim() {
        return Err(Error::Dimension(format!(
            "grid dimension {} vs background dimension {}",
            v.grid().dim(),
            bf.dim()
        )));
    }
    if !(v.is_mean_zero() && b.is_mean_zero()) {
        return precondition("linear evolution needs mean-zero data");
    }
    let div = v.div_residual().max(b.div_residual());
    if div > 1e-12 {
        return precondition(format!("data is not divergence-free (residual {div:.3e})"));
    }
    Ok(())
}

/// Solution `(V, H)(t)` of the linearized system from `(V0, H0)`.
pub fn evolve_linear(
    v0: &SpectralVectorField,
    h0: &SpectralVectorField,
    bf: &BackgroundField,
    t: f64,
) -> Result<(SpectralVectorField, SpectralVectorField)> {
    check_time(t)?;
    check_pair(v0, h0, bf)?;
    let table = propagator_table(v0.grid(), bf, t);
    let mut v = v0.clone();
    let mut h = h0.clone();
    apply_table(&table, &mut v, &mut h);
    Ok((v, h))
}

/// Magnitudes of the Duhamel kernels at one mode and time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValues {
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

pub fn kernel_values(md: &ModeDecomposition, t: f64) -> Result<KernelValues> {
    check_time(t)?;
    let (_, s) = closed_form(md.theta, t);
    let g = s.abs();
    let l1 = md.lambda1;
    let g1 = g * (l1.norm_sqr() + md.theta * md.theta).sqrt();
    let g2 = g1 * (md.theta / l1.norm()).abs();
    let g3 = if md.region == Region::S1 {
        (-0.5 * t).exp()
    } else {
        (-l1.re * t).exp()
    };
    Ok(KernelValues { g, g1, g2, g3 })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre() -> &'static [(f64, f64)] {
    const ORDER: usize = 10;
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        (0..n)
            .map(|i| {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

/// A time-integrated quadratic observable of the linear solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Integrand {
    /// `||v||^2` in the given norm.
    Velocity(SobolevIndex),
    /// `||b||^2` in the given norm.
    Magnetic(SobolevIndex),
    /// `||Lambda^{-1} (btilde . grad) b||^2` in the given norm.
    AdvectedMagnetic(SobolevIndex),
}

impl Integrand {
    /// Per-mode weights `(on |v(j)|^2, on |b(j)|^2)`.
    #[inline]
    pub fn weights(&self, k2: f64, theta: f64) -> (f64, f64) {
        match self {
            Integrand::Velocity(idx) => (idx.weight(k2), 0.0),
            Integrand::Magnetic(idx) => (0.0, idx.weight(k2)),
            Integrand::AdvectedMagnetic(idx) => {
                if k2 == 0.0 {
                    (0.0, 0.0)
                } else {
                    (0.0, theta * theta / k2 * idx.weight(k2))
                }
            }
        }
    }

    /// Value on a state.
    pub fn evaluate(&self, v: &SpectralVectorField, b: &SpectralVectorField, bf: &BackgroundField) -> f64 {
        let grid = v.grid();
        let mut acc = 0.0;
        for idx in 0..grid.len() {
            let (wv, wb) = self.weights(grid.k2(idx), bf.dot(&grid.wavevector(idx)));
            for k in 0..grid.dim() {
                if wv != 0.0 {
                    acc += wv * v.component(k)[idx].norm_sqr();
                }
                if wb != 0.0 {
                    acc += wb * b.component(k)[idx].norm_sqr();
                }
            }
        }
        acc
    }
}

/// Integrals of the propagator entry products over `[t0, t1]`, in the order
/// `(p^2, q^2, r^2, p q, q r)`.
///
/// Composite Gauss-Legendre with panels short against the mode's oscillation
/// period, accurate to roughly machine precision.
pub(crate) fn entry_integrals(theta: f64, t0: f64, t1: f64) -> [f64; 5] {
    let rule = gauss_legendre();
    let w = (theta * theta - 0.25).max(0.0).sqrt();
    let panel = if w > 1.0 { 1.0 / w } else { 1.0 };
    let len = t1 - t0;
    let mut out = [0.0; 5];
    if len <= 0.0 {
        return out;
    }
    let panels = (len / panel).ceil().max(1.0) as usize;
    let h = len / panels as f64;
    for i in 0..panels {
        let mid = t0 + (i as f64 + 0.5) * h;
        for &(node, weight) in rule {
            let m = Propagator::new(theta, mid + 0.5 * h * node);
            let wh = 0.5 * h * weight;
            out[0] += wh * m.p * m.p;
            out[1] += wh * m.q * m.q;
            out[2] += wh * m.r * m.r;
            out[3] += wh * m.p * m.q;
            out[4] += wh * m.q * m.r;
        }
    }
    out
}

/// Quadratic data of one mode of `(v0, b0)`: `(sum |v_k|^2, sum |b_k|^2,
/// Im sum v_k conj(b_k))`.
#[inline]
pub(crate) fn mode_moments(v: &SpectralVectorField, b: &SpectralVectorField, idx: usize) -> (f64, f64, f64) {
    let (mut aa, mut cc, mut x) = (0.0, 0.0, Complex64::default());
    for k in 0..v.dim() {
        let (a, c) = (v.component(k)[idx], b.component(k)[idx]);
        aa += a.norm_sqr();
        cc += c.norm_sqr();
        x += a * c.conj();
    }
    (aa, cc, x.im)
}

/// `int |v(tau)|^2` and `int |b(tau)|^2` of one linearly evolving mode, from
/// its entry integrals and moments.
#[inline]
pub(crate) fn combine_mode(ints: &[f64; 5], moments: (f64, f64, f64)) -> (f64, f64) {
    let (aa, cc, xi) = moments;
    // v = p a + i q c,  b = i q a + r c
    let v = ints[0] * aa + ints[1] * cc + 2.0 * ints[3] * xi;
    let b = ints[1] * aa + ints[2] * cc - 2.0 * ints[4] * xi;
    (v, b)
}

/// `int_0^{t_i} F(V, H)(tau) dtau` for every time `t_i` (nondecreasing) and
/// integrand `F`, where `(V, H)` is the linear solution from `(V0, H0)`.
pub fn linear_dissipation(
    v0: &SpectralVectorField,
    h0: &SpectralVectorField,
    bf: &BackgroundField,
    times: &[f64],
    integrands: &[Integrand],
) -> Result<Vec<Vec<f64>>> {
    check_pair(v0, h0, bf)?;
    for &t in times {
        check_time(t)?;
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return precondition("integration times must be nondecreasing");
    }
    let grid = v0.grid();
    let modes: Vec<usize> = (1..grid.len())
        .filter(|&idx| {
            let (aa, cc, _) = mode_moments(v0, h0, idx);
            aa != 0.0 || cc != 0.0
        })
        .collect();

    // per mode: cumulative (int |v|^2, int |b|^2) at each time
    let per_mode: Vec<Vec<(f64, f64)>> = modes
        .par_iter()
        .map(|&idx| {
            let theta = bf.dot(&grid.wavevector(idx));
            let moments = mode_moments(v0, h0, idx);
            let mut out = Vec::with_capacity(times.len());
            let (mut sv, mut sb) = (0.0, 0.0);
            let mut from = 0.0;
            for &t in times {
                let (dv, db) = combine_mode(&entry_integrals(theta, from, t), moments);
                sv += dv;
                sb += db;
                from = t;
                out.push((sv, sb));
            }
            out
        })
        .collect();

    let mut result = vec![vec![0.0; integrands.len()]; times.len()];
    for (&idx, cumulative) in modes.iter().zip(&per_mode) {
        let k2 = grid.k2(idx);
        let theta = bf.dot(&grid.wavevector(idx));
        let weights: Vec<(f64, f64)> = integrands.iter().map(|f| f.weights(k2, theta)).collect();
        for (row, &(sv, sb)) in result.iter_mut().zip(cumulative) {
            for (slot, &(wv, wb)) in row.iter_mut().zip(&weights) {
                *slot += wv * sv + wb * sb;
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn degenerate_theta() {
        let md = ModeDecomposition::from_theta(0.5);
        assert_eq!(md.region, Region::S1);
        assert_eq!(md.discriminant, 0.0);
        assert_eq!(md.lambda1, Complex64::new(0.5, 0.0));
        assert_eq!(md.lambda2, Complex64::new(0.5, 0.0));
        for t in [0.0, 0.3, 2.0, 17.0] {
            let k = kernel_values(&md, t).unwrap();
            assert!(close(k.g, t * (-0.5 * t).exp(), 1e-15));
        }
    }

    #[test]
    fn small_theta_lands_in_s3() {
        let md = ModeDecomposition::from_theta(0.1);
        assert_eq!(md.region, Region::S3);
        let l2 = md.lambda2.re;
        assert!(l2 > 0.01 && l2 <= 4.0 * 0.01 / 3.0);
        assert!((md.lambda1.re + l2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn theta_one_is_oscillatory() {
        let md = ModeDecomposition::from_theta(1.0);
        assert_eq!(md.region, Region::S1);
        assert!((md.lambda1 - Complex64::new(0.5, 0.75f64.sqrt())).norm() < 1e-15);
        assert!((md.lambda2 - Complex64::new(0.5, -0.75f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn region_boundaries() {
        // 1 - 4 theta^2 = 1/4 at theta = sqrt(3)/4
        assert_eq!(Region::of_theta(3f64.sqrt() / 4.0 + 1e-12), Region::S2);
        assert_eq!(Region::of_theta(0.3), Region::S3);
        assert_eq!(Region::of_theta(0.49), Region::S2);
        assert_eq!(Region::of_theta(-0.6), Region::S1);
    }

    #[test]
    fn zero_time_is_identity() {
        for theta in [0.0, 0.1, 0.5, 0.7, 3.0] {
            let m = Propagator::new(theta, 0.0);
            assert_eq!(m, Propagator::IDENTITY);
            let k = kernel_values(&ModeDecomposition::from_theta(theta), 0.0).unwrap();
            assert_eq!(k.g, 0.0);
            assert_eq!(k.g3, 1.0);
        }
    }

    #[test]
    fn determinant_is_exp_minus_t() {
        for &theta in &[0.05, 0.3, 0.45, 0.5, 0.5 + 1e-9, 0.9, 2.5] {
            for &t in &[0.1, 1.0, 7.5, 40.0] {
                let m = Propagator::new(theta, t);
                assert!(close(m.det(), (-t).exp(), 1e-12), "theta {theta} t {t}");
            }
        }
    }

    #[test]
    fn group_property() {
        for &theta in &[0.05, 0.3, 0.5, 1.7] {
            let a = Propagator::new(theta, 1.3).matrix();
            let b = Propagator::new(theta, 2.1).matrix();
            let ab = Propagator::new(theta, 3.4).matrix();
            for i in 0..2 {
                for k in 0..2 {
                    let prod = a[i][0] * b[0][k] + a[i][1] * b[1][k];
                    assert!((prod - ab[i][k]).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn s1_g3_is_exactly_damping() {
        let md = ModeDecomposition::from_theta(1.3);
        for t in [0.5, 3.0, 20.0] {
            assert_eq!(kernel_values(&md, t).unwrap().g3, (-0.5 * t).exp());
        }
    }

    #[test]
    fn negative_time_rejected() {
        let md = ModeDecomposition::from_theta(0.2);
        assert!(propagator_matrix(&md, -1.0).is_err());
        assert!(kernel_values(&md, f64::NAN).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre();
        let total: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-14);
        let x18: f64 = rule.iter().map(|&(x, w)| w * x.powi(18)).sum();
        assert!((x18 - 2.0 / 19.0).abs() < 1e-14);
    }
}
