//! Brute-force sweep of the kernel bounds over a lattice ball and a time grid.
//!
//! Each report records the smallest constant `C` with
//! `observed <= C * envelope` on every sample of its region.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diophantine::BackgroundField;
use crate::error::{precondition, Result};
use crate::propagator::{kernel_values, ModeDecomposition, Region};
use crate::spectral::Wavevector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    G,
    G1,
    G2,
    G3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `None` for a bound checked over every region.
    pub region: Option<Region>,
    pub kernel: Kernel,
    pub bound_form: String,
    pub c_empirical: f64,
    pub worst_case: Option<(Wavevector, f64)>,
    pub samples: u64,
    /// Set when no lattice point fell in the region.
    pub empty: bool,
    /// Sharper envelopes kept for reference; not part of the stated bounds.
    pub informational: bool,
}

struct Check {
    region: Option<Region>,
    kernel: Kernel,
    form: &'static str,
    informational: bool,
    /// Envelope at `(|j|, theta, t)`.
    envelope: fn(f64, f64, f64) -> f64,
}

const CHECKS: [Check; 8] = [
    Check {
        region: Some(Region::S1),
        kernel: Kernel::G1,
        form: "|G1| <= C |j| exp(-t/4)",
        informational: false,
        envelope: |nj, _, t| nj * (-0.25 * t).exp(),
    },
    Check {
        region: Some(Region::S1),
        kernel: Kernel::G2,
        form: "|G2| <= C |j| exp(-t/4)",
        informational: false,
        envelope: |nj, _, t| nj * (-0.25 * t).exp(),
    },
    Check {
        region: Some(Region::S2),
        kernel: Kernel::G1,
        form: "|G1| <= C exp(-t/8)",
        informational: false,
        envelope: |_, _, t| (-0.125 * t).exp(),
    },
    Check {
        region: Some(Region::S2),
        kernel: Kernel::G2,
        form: "|G2| <= C exp(-t/8)",
        informational: false,
        envelope: |_, _, t| (-0.125 * t).exp(),
    },
    Check {
        region: Some(Region::S3),
        kernel: Kernel::G1,
        form: "|G1| <= C exp(-theta^2 t)",
        informational: false,
        envelope: |_, th, t| (-th * th * t).exp(),
    },
    Check {
        region: Some(Region::S3),
        kernel: Kernel::G2,
        form: "|G2| <= C |theta| exp(-theta^2 t)",
        informational: false,
        envelope: |_, th, t| th.abs() * (-th * th * t).exp(),
    },
    Check {
        region: None,
        kernel: Kernel::G3,
        form: "|G3| <= C exp(-t/2)",
        informational: false,
        envelope: |_, _, t| (-0.5 * t).exp(),
    },
    Check {
        region: Some(Region::S1),
        kernel: Kernel::G,
        form: "|G| <= C t exp(-t/2)",
        informational: true,
        envelope: |_, _, t| t * (-0.5 * t).exp(),
    },
];

#[derive(Clone, Copy)]
struct Acc {
    c: f64,
    at: Option<(Wavevector, f64)>,
    samples: u64,
}

impl Acc {
    const EMPTY: Acc = Acc {
        c: 0.0,
        at: None,
        samples: 0,
    };

    /// Larger ratio wins; ties go to the smaller `(j, t)`.
    fn offer(&mut self, ratio: f64, j: Wavevector, t: f64) {
        self.samples += 1;
        let better = match self.at {
            None => true,
            Some((bj, bt)) => match ratio.total_cmp(&self.c) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => (j, t.to_bits()) < (bj, bt.to_bits()),
            },
        };
        if better {
            self.c = ratio;
            self.at = Some((j, t));
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        let samples = self.samples + other.samples;
        if let Some((j, t)) = other.at {
            self.offer(other.c, j, t);
        }
        self.samples = samples;
        self
    }
}

/// Mixed default grid: `[0, 2]` in steps of 0.05, then geometric with ratio
/// 1.05 up to and including `t_max`.
pub fn default_time_grid(t_max: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).filter(|&t| t <= t_max).collect();
    let mut t = 2.0 * 1.05;
    while t < t_max {
        grid.push(t);
        t *= 1.05;
    }
    if t_max > 2.0 {
        grid.push(t_max);
    }
    grid
}

fn ball(dim: usize, radius: i64) -> Vec<Wavevector> {
    let span = if dim == 3 { radius } else { 0 };
    let mut out = Vec::new();
    for a in -radius..=radius {
        for b in -radius..=radius {
            for c in -span..=span {
                let n2 = a * a + b * b + c * c;
                if n2 != 0 && n2 <= radius * radius {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Sweeps every `0 < |j| <= radius` and every time in `time_grid`.
///
/// Returns the six regional reports, the global `G3` report and an
/// informational `t exp(-t/2)` report for `S1`, in that order.
pub fn sweep_bounds(bf: &BackgroundField, radius: i64, time_grid: &[f64]) -> Result<Vec<BoundReport>> {
    if radius < 1 {
        return precondition(format!("lattice radius must be >= 1, got {radius}"));
    }
    if time_grid.is_empty() || time_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return precondition("time grid must be nonempty with finite t >= 0");
    }
    let modes = ball(bf.dim(), radius);
    let accs = modes
        .par_iter()
        .map(|j| {
            let mut accs = [Acc::EMPTY; CHECKS.len()];
            let md = ModeDecomposition {
                j: *j,
                ..ModeDecomposition::from_theta(bf.dot(j))
            };
            let nj = ((j[0] * j[0] + j[1] * j[1] + j[2] * j[2]) as f64).sqrt();
            for &t in time_grid {
                let k = kernel_values(&md, t).expect("validated time grid");
                for (check, acc) in CHECKS.iter().zip(accs.iter_mut()) {
                    if check.region.is_some_and(|r| r != md.region) {
                        continue;
                    }
                    let observed = match check.kernel {
                        Kernel::G => k.g,
                        Kernel::G1 => k.g1,
                        Kernel::G2 => k.g2,
                        Kernel::G3 => k.g3,
                    };
                    let envelope = (check.envelope)(nj, md.theta, t);
                    let ratio = if observed == 0.0 {
                        0.0
                    } else if envelope == 0.0 {
                        f64::INFINITY
                    } else {
                        observed / envelope
                    };
                    acc.offer(ratio, *j, t);
                }
            }
            accs
        })
        .reduce(
            || [Acc::EMPTY; CHECKS.len()],
            |a, b| {
                let mut out = a;
                for (slot, other) in out.iter_mut().zip(b) {
                    *slot = slot.merge(other);
                }
                out
            },
        );

    Ok(CHECKS
        .iter()
        .zip(accs)
        .map(|(check, acc)| BoundReport {
            region: check.region,
            kernel: check.kernel,
            bound_form: check.form.to_string(),
            c_empirical: acc.c,
            worst_case: acc.at,
            samples: acc.samples,
            empty: acc.samples == 0,
            informational: check.informational,
        })
        .collect())
}
