//! Independent reference computations for the integration tests.
//!
//! Nothing here calls the library's propagator, nonlinearity or lattice
//! search; fields are read and written only through raw coefficients.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torus_mhd::diophantine::{estimate_constant, preset_vector, BackgroundField};
use torus_mhd::solver::{make_initial_data, SimulationState};
use torus_mhd::spectral::{SpectralGrid, SpectralVectorField};

pub type M2 = [[C; 2]; 2];

pub fn mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[C::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Matrix exponential by scaling, 30-term Taylor and squaring.
pub fn expm(a: &M2) -> M2 {
    let norm = a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a.map(|row| row.map(|z| z * scale));
    let mut term = [[C::new(1.0, 0.0), C::default()], [C::default(), C::new(1.0, 0.0)]];
    let mut sum = term;
    for k in 1..30 {
        term = mul(&term, &x);
        for row in term.iter_mut() {
            for z in row.iter_mut() {
                *z /= k as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    sum
}

/// `exp(-Q t)` with `Q = [[1, -i theta], [-i theta, 0]]`.
pub fn propagator_oracle(theta: f64, t: f64) -> M2 {
    let it = C::new(0.0, theta * t);
    expm(&[[C::new(-t, 0.0), it], [it, C::default()]])
}

/// Classical RK4 on `v' = -v + i theta b`, `b' = i theta v`.
pub fn rk4_mode(theta: f64, v0: C, b0: C, t: f64, steps: usize) -> (C, C) {
    let i = C::i();
    let f = |v: C, b: C| (-v + i * theta * b, i * theta * v);
    let h = t / steps as f64;
    let (mut v, mut b) = (v0, b0);
    for _ in 0..steps {
        let (k1v, k1b) = f(v, b);
        let (k2v, k2b) = f(v + k1v * (h / 2.0), b + k1b * (h / 2.0));
        let (k3v, k3b) = f(v + k2v * (h / 2.0), b + k2b * (h / 2.0));
        let (k4v, k4b) = f(v + k3v * h, b + k3b * h);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        b += (k1b + k2b * 2.0 + k3b * 2.0 + k4b) * (h / 6.0);
    }
    (v, b)
}

/// Composite Simpson rule with `2 n` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let m = 2 * n;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// `min |b.j| |j|^r` over `0 < |j| <= radius` by plain enumeration, with
/// the minimizing `j`.
pub fn brute_force_constant(btilde: &[f64], r: f64, radius: i64) -> (f64, Vec<i64>) {
    let dim = btilde.len();
    let mut best = (f64::INFINITY, Vec::new());
    let span3 = if dim == 3 { radius } else { 0 };
    for a in -radius..=radius {
        for b in -radius..=radius {
            for c in -span3..=span3 {
                let j = [a, b, c];
                let k2 = (a * a + b * b + c * c) as f64;
                if k2 == 0.0 || k2 > (radius * radius) as f64 {
                    continue;
                }
                let dot: f64 = (0..dim).map(|i| btilde[i] * j[i] as f64).sum();
                let value = dot.abs() * k2.powf(0.5 * r);
                if value < best.0 {
                    best = (value, j[..dim].to_vec());
                }
            }
        }
    }
    best
}

/// Wavevectors with every component in `[-cut, cut]`.
fn cube(dim: usize, cut: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::new();
        for prefix in &out {
            for a in -cut..=cut {
                let mut j = prefix.clone();
                j.push(a);
                next.push(j);
            }
        }
        out = next;
    }
    out
}

fn project(j: &[i64], w: &mut [C]) {
    let k2: f64 = j.iter().map(|&a| (a * a) as f64).sum();
    if k2 == 0.0 {
        w.iter_mut().for_each(|z| *z = C::default());
        return;
    }
    let dot: C = j.iter().zip(w.iter()).map(|(&a, z)| *z * a as f64).sum();
    for (a, z) in j.iter().zip(w.iter_mut()) {
        *z -= dot * (*a as f64 / k2);
    }
}

/// `N1 = P(v.grad v - b.grad b)` and `N2 = v.grad b - b.grad v` by direct
/// convolution in advective form over the 2/3-truncated cube.
pub fn direct_nonlinear(
    v: &SpectralVectorField,
    b: &SpectralVectorField,
) -> (SpectralVectorField, SpectralVectorField) {
    let grid = v.grid();
    let dim = grid.dim();
    let cut = grid.n() as i64 / 3;
    let modes = cube(dim, cut);
    let coeffs = |f: &SpectralVectorField, j: &[i64]| f.coeff(j).unwrap();
    let vc: Vec<[C; 3]> = modes.iter().map(|j| coeffs(v, j)).collect();
    let bc: Vec<[C; 3]> = modes.iter().map(|j| coeffs(b, j)).collect();
    let side = (2 * cut + 1) as usize;
    let flat = |j: &[i64]| -> Option<usize> {
        let mut idx = 0usize;
        for &a in j {
            if a.abs() > cut {
                return None;
            }
            idx = idx * side + (a + cut) as usize;
        }
        Some(idx)
    };
    let mut n1 = vec![[C::default(); 3]; modes.len()];
    let mut n2 = vec![[C::default(); 3]; modes.len()];
    let i = C::i();
    for (pi, p) in modes.iter().enumerate() {
        for (qi, q) in modes.iter().enumerate() {
            let j: Vec<i64> = p.iter().zip(q).map(|(a, b)| a + b).collect();
            let Some(ji) = flat(&j) else { continue };
            // (f.grad g)_k at j collects i q_l f_l(p) g_k(q)
            let mut vq = C::default();
            let mut bq = C::default();
            for l in 0..dim {
                vq += vc[pi][l] * (i * q[l] as f64);
                bq += bc[pi][l] * (i * q[l] as f64);
            }
            for k in 0..dim {
                n1[ji][k] += vq * vc[qi][k] - bq * bc[qi][k];
                n2[ji][k] += vq * bc[qi][k] - bq * vc[qi][k];
            }
        }
    }
    let mut out1 = SpectralVectorField::zeros(grid);
    let mut out2 = SpectralVectorField::zeros(grid);
    for (mi, j) in modes.iter().enumerate() {
        let mut w = n1[mi][..dim].to_vec();
        project(j, &mut w);
        out1.set_coeff(j, &w).unwrap();
        let mut z = n2[mi][..dim].to_vec();
        if j.iter().all(|&a| a == 0) {
            z.iter_mut().for_each(|c| *c = C::default());
        }
        out2.set_coeff(j, &z).unwrap();
    }
    (out1, out2)
}

/// `sum_j w(|j|^2) |f(j)|^2` read off the raw coefficients.
pub fn weighted_sum_sq(f: &SpectralVectorField, w: impl Fn(f64) -> f64) -> f64 {
    let grid = f.grid();
    let mut acc = 0.0;
    for idx in 0..grid.len() {
        let j = grid.wavevector(idx);
        let k2: f64 = j.iter().map(|&a| (a * a) as f64).sum();
        let e: f64 = f.components().iter().map(|c| c[idx].norm_sqr()).sum();
        if e > 0.0 {
            acc += w(k2) * e;
        }
    }
    acc
}

pub fn background(name: &str, r: f64, radius: i64) -> BackgroundField {
    estimate_constant(&preset_vector(name).unwrap(), r, radius).unwrap()
}

pub fn random_state(dim: usize, n: usize, m: u32, epsilon: f64, seed: u64) -> SimulationState {
    let grid = SpectralGrid::new(dim, n).unwrap();
    let bf = if dim == 2 {
        background("sqrt2", 1.01, 16)
    } else {
        background("sqrt2-sqrt3", 2.01, 8)
    };
    let (v, b) = make_initial_data(&grid, &bf, m, epsilon, m as f64 + 1.0, seed).unwrap();
    SimulationState::new(v, b, bf).unwrap()
}

/// Mean-zero, divergence-free, real field with random coefficients up to
/// `|j_i| <= band`.
pub fn random_solenoidal(grid: &SpectralGrid, band: i64, seed: u64) -> SpectralVectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut f = SpectralVectorField::zeros(grid);
    for j in cube(dim, band) {
        let pos = j.iter().find(|&&a| a != 0).is_some_and(|&a| a > 0);
        if !pos {
            continue;
        }
        let mut w: Vec<C> = (0..dim)
            .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        project(&j, &mut w);
        f.set_mode_pair(&j, &w).unwrap();
    }
    f
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn matrix_rel_err(a: &M2, b: &M2) -> f64 {
    let scale = b.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    diff / scale
}
