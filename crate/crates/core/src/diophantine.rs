//! Truncated-lattice certification of the non-resonance condition
//! `|b.j| >= c / |j|^r` and the Poincare-type inequality it implies.
//!
//! The constant is estimated as the exact minimum of `|b.j| |j|^r` over the
//! ball `0 < |j| <= J`, so every guarantee derived from it holds up to the
//! lattice radius `J` and no further.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::spectral::{SpectralVectorField, Wavevector};

/// `|b.j| < RESONANCE_TOL |b| |j|` is treated as an exact cancellation.
pub const RESONANCE_TOL: f64 = 1e-12;

/// Constant background magnetic field with its estimated Diophantine pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundField {
    pub btilde: Vec<f64>,
    pub r: f64,
    pub c_est: f64,
    pub lattice_radius: i64,
    /// Canonical representative (first nonzero component positive) of the
    /// minimizing `+-j` pair.
    pub argmin: Wavevector,
}

impl BackgroundField {
    pub fn dim(&self) -> usize {
        self.btilde.len()
    }

    /// `b.j`.
    #[inline]
    pub fn dot(&self, j: &Wavevector) -> f64 {
        dot(&self.btilde, j)
    }

    /// Euclidean length `|b|`.
    pub fn magnitude(&self) -> f64 {
        self.btilde.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Whether `r > n - 1`, the exponent range the decay theorems assume.
    pub fn exponent_in_theorem_range(&self) -> bool {
        self.r > (self.dim() as f64 - 1.0)
    }

    /// The same field with `b` negated; the constant and argmin are unchanged.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for x in &mut out.btilde {
            *x = -*x;
        }
        out
    }
}

#[inline]
fn dot(b: &[f64], j: &Wavevector) -> f64 {
    b.iter().zip(j.iter()).map(|(x, &k)| x * k as f64).sum()
}

#[inline]
fn norm(j: &Wavevector) -> f64 {
    ((j[0] * j[0] + j[1] * j[1] + j[2] * j[2]) as f64).sqrt()
}

/// One entry of the near-resonance list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearResonance {
    pub j: Wavevector,
    /// `|b.j| |j|^r`.
    pub value: f64,
    /// `b.j`.
    pub dot: f64,
}

/// Named background vectors shipped with the harness.
pub fn preset_vector(name: &str) -> Option<Vec<f64>> {
    let golden = 0.5 * (1.0 + 5f64.sqrt());
    match name {
        "sqrt2" => Some(vec![1.0, 2f64.sqrt()]),
        "golden" => Some(vec![1.0, golden]),
        "sqrt2-sqrt3" => Some(vec![1.0, 2f64.sqrt(), 3f64.sqrt()]),
        _ => None,
    }
}

/// Canonical half of the ball `0 < |j| <= radius`, one representative per
/// `+-j` pair, grouped by first component.
fn half_ball_rows(dim: usize, radius: i64) -> impl ParallelIterator<Item = Vec<Wavevector>> {
    (0..=radius).into_par_iter().map(move |a| {
        let r2 = radius * radius;
        let mut row = Vec::new();
        let span = if dim == 3 { radius } else { 0 };
        for b in -radius..=radius {
            for c in -span..=span {
                let j = [a, b, c];
                let n2 = a * a + b * b + c * c;
                if n2 == 0 || n2 > r2 {
                    continue;
                }
                let canonical = a > 0 || (a == 0 && (b > 0 || (b == 0 && c > 0)));
                if canonical {
                    row.push(j);
                }
            }
        }
        row
    })
}

fn validate(btilde: &[f64], r: f64, radius: i64) -> Result<()> {
    if !(btilde.len() == 2 || btilde.len() == 3) {
        return precondition(format!("background must have 2 or 3 components, got {}", btilde.len()));
    }
    if btilde.iter().any(|x| !x.is_finite()) || btilde.iter().all(|&x| x == 0.0) {
        return precondition("background must be finite and nonzero");
    }
    if !(r.is_finite() && r > 0.0) {
        return precondition(format!("Diophantine exponent must be positive, got {r}"));
    }
    if radius < 1 {
        return precondition(format!("lattice radius must be >= 1, got {radius}"));
    }
    Ok(())
}

/// Exact minimum of `|b.j| |j|^r` over `0 < |j| <= radius`.
///
/// Fails with [`Error::ResonantBackground`] when some enumerated `j` makes
/// `b.j` vanish (to within `RESONANCE_TOL |b| |j|`); the reported `j` is the
/// lexicographically smallest offender.
pub fn estimate_constant(btilde: &[f64], r: f64, radius: i64) -> Result<BackgroundField> {
    validate(btilde, r, radius)?;
    let bmag = btilde.iter().map(|x| x * x).sum::<f64>().sqrt();

    #[derive(Clone, Copy)]
    struct Acc {
        best: Option<(f64, Wavevector)>,
        resonant: Option<(Wavevector, f64)>,
    }
    let empty = Acc {
        best: None,
        resonant: None,
    };
    let merge = |x: Acc, y: Acc| Acc {
        best: match (x.best, y.best) {
            (Some(p), Some(q)) => Some(if (q.0, q.1) < (p.0, p.1) { q } else { p }),
            (p, q) => p.or(q),
        },
        resonant: match (x.resonant, y.resonant) {
            (Some(p), Some(q)) => Some(if q.0 < p.0 { q } else { p }),
            (p, q) => p.or(q),
        },
    };

    let acc = half_ball_rows(btilde.len(), radius)
        .map(|row| {
            let mut acc = empty;
            for j in row {
                let d = dot(btilde, &j);
                let nj = norm(&j);
                if d.abs() < RESONANCE_TOL * bmag * nj {
                    if acc.resonant.is_none_or(|(k, _)| j < k) {
                        acc.resonant = Some((j, d));
                    }
                    continue;
                }
                let value = d.abs() * nj.powf(r);
                if acc.best.is_none_or(|b| (value, j) < (b.0, b.1)) {
                    acc.best = Some((value, j));
                }
            }
            acc
        })
        .reduce(|| empty, merge);

    if let Some((j, d)) = acc.resonant {
        return Err(Error::ResonantBackground {
            j: j[..btilde.len()].to_vec(),
            dot: d.abs(),
        });
    }
    let (c_est, argmin) = acc.best.expect("ball of radius >= 1 is nonempty");
    Ok(BackgroundField {
        btilde: btilde.to_vec(),
        r,
        c_est,
        lattice_radius: radius,
        argmin,
    })
}

/// The `top_k` smallest values of `|b.j| |j|^r` over the field's lattice
/// ball, ascending, one entry per `+-j` pair. Shorter if the ball has fewer
/// pairs.
pub fn near_resonances(bf: &BackgroundField, top_k: usize) -> Vec<NearResonance> {
    let mut all: Vec<NearResonance> = half_ball_rows(bf.dim(), bf.lattice_radius)
        .flat_map_iter(|row| {
            row.into_iter().map(|j| {
                let d = bf.dot(&j);
                NearResonance {
                    j,
                    value: d.abs() * norm(&j).powf(bf.r),
                    dot: d,
                }
            })
        })
        .collect();
    all.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.j.cmp(&b.j)));
    all.truncate(top_k);
    all
}

/// `||g||_{Hdot^s} / ||b.grad g||_{Hdot^{s+r}}` for a mean-zero field
/// band-limited to the certified ball; bounded by `1 / c_est`.
pub fn verify_poincare(bf: &BackgroundField, g: &SpectralVectorField, s: f64) -> Result<f64> {
    if g.grid().dim() != bf.dim() {
        return Err(Error::Dimension(format!(
            "field dimension {} vs background dimension {}",
            g.grid().dim(),
            bf.dim()
        )));
    }
    if !g.is_mean_zero() {
        return precondition("Poincare check needs a mean-zero field");
    }
    let radius = bf.lattice_radius as f64;
    let grid = g.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    for idx in 1..grid.len() {
        let amp: f64 = g.components().iter().map(|c| c[idx].norm_sqr()).sum();
        if amp == 0.0 {
            continue;
        }
        let k2 = grid.k2(idx);
        if k2 > radius * radius {
            return precondition(format!(
                "field has energy at |j| = {} beyond the certified radius {}",
                k2.sqrt(),
                bf.lattice_radius
            ));
        }
        let theta = bf.dot(&grid.wavevector(idx));
        num += k2.powf(s) * amp;
        den += theta * theta * k2.powf(s + bf.r) * amp;
    }
    if num == 0.0 {
        return precondition("Poincare ratio is undefined for the zero field");
    }
    Ok((num / den).sqrt())
}
