//! Observables, the modified energy, decay-rate fits and CSV time series.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diophantine::BackgroundField;
use crate::error::{precondition, Error, Result};
use crate::solver::SimulationState;
use crate::spectral::{sobolev_norm_sq, SobolevIndex, SpectralVectorField};

/// Values below this are treated as the numerical floor by [`fit_decay`].
pub const NORM_FLOOR: f64 = 1e-14;

/// Which field a norm is taken of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    V,
    B,
    /// The pair `(v, b)`.
    Pair,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormKey {
    pub field: FieldKind,
    pub index: SobolevIndex,
}

impl NormKey {
    pub fn new(field: FieldKind, index: SobolevIndex) -> Self {
        Self { field, index }
    }

    pub fn evaluate(&self, v: &SpectralVectorField, b: &SpectralVectorField) -> f64 {
        let sq = match self.field {
            FieldKind::V => sobolev_norm_sq(v, self.index),
            FieldKind::B => sobolev_norm_sq(b, self.index),
            FieldKind::Pair => sobolev_norm_sq(v, self.index) + sobolev_norm_sq(b, self.index),
        };
        sq.sqrt()
    }
}

/// Column label, e.g. `v_H4`, `b_Hdot0`, `vb_H1.5`.
impl fmt::Display for NormKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let field = match self.field {
            FieldKind::V => "v",
            FieldKind::B => "b",
            FieldKind::Pair => "vb",
        };
        write!(f, "{field}_{}", self.index.label())
    }
}

impl FromStr for NormKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("not a norm column: {s}"));
        let (field, index) = s.split_once('_').ok_or_else(bad)?;
        let field = match field {
            "v" => FieldKind::V,
            "b" => FieldKind::B,
            "vb" => FieldKind::Pair,
            _ => return Err(bad()),
        };
        let index = if let Some(order) = index.strip_prefix("Hdot") {
            SobolevIndex::homogeneous(order.parse().map_err(|_| bad())?)
        } else if let Some(order) = index.strip_prefix('H') {
            SobolevIndex::inhomogeneous(order.parse().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        Ok(Self { field, index })
    }
}

/// One observation of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub t: f64,
    pub norms: Vec<(NormKey, f64)>,
    /// Modified energy `Q_s` per integer level `s`.
    pub q_s: Vec<(u32, f64)>,
    /// `int_0^t ||v||^2_{H^m}`.
    pub cumulative_damping: f64,
    /// Further named scalars (energy functional terms and the like).
    pub extras: Vec<(String, f64)>,
    pub div_residual: f64,
    pub mean_residual: f64,
    pub hermitian_residual: f64,
}

const FIXED_TAIL: [&str; 3] = ["div_residual", "mean_residual", "hermitian_residual"];

impl ObservationRow {
    /// `(label, value)` in CSV column order.
    pub fn columns(&self) -> Vec<(String, f64)> {
        let mut out = vec![("t".to_string(), self.t)];
        out.extend(self.norms.iter().map(|(k, v)| (k.to_string(), *v)));
        out.extend(self.q_s.iter().map(|(s, v)| (format!("Q_{s}"), *v)));
        out.push(("cumulative_damping".into(), self.cumulative_damping));
        out.extend(self.extras.iter().cloned());
        out.push((FIXED_TAIL[0].into(), self.div_residual));
        out.push((FIXED_TAIL[1].into(), self.mean_residual));
        out.push((FIXED_TAIL[2].into(), self.hermitian_residual));
        out
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.columns().into_iter().find(|(l, _)| l == label).map(|(_, v)| v)
    }
}

/// Default weight `a = 1 + |b|/2 + |b|^2/2` of the modified energy.
pub fn default_modified_energy_weight(bf: &BackgroundField) -> f64 {
    let b = bf.magnitude();
    1.0 + 0.5 * b + 0.5 * b * b
}

/// Cross term `sum_{l=0..s} Re sum_{j != 0} |j|^{2l-2} (i btilde.j) b(j).conj(v(j))`.
pub fn modified_energy_cross_term(
    v: &SpectralVectorField,
    b: &SpectralVectorField,
    bf: &BackgroundField,
    s: u32,
) -> f64 {
    let grid = v.grid();
    let mut acc = 0.0;
    for idx in 1..grid.len() {
        let k2 = grid.k2(idx);
        let theta = bf.dot(&grid.wavevector(idx));
        let mut dot = Complex64::default();
        for k in 0..grid.dim() {
            dot += b.component(k)[idx] * v.component(k)[idx].conj();
        }
        if dot == Complex64::default() {
            continue;
        }
        let mut levels = 0.0;
        let mut p = 1.0 / k2;
        for _ in 0..=s {
            levels += p;
            p *= k2;
        }
        acc += (Complex64::new(0.0, theta) * dot).re * levels;
    }
    acc
}

/// Modified energy `Q_s = a ||(v, b)||^2_{H^s} - cross term`.
pub fn modified_energy(state: &SimulationState, s: u32, a: f64) -> f64 {
    modified_energy_of(&state.v, &state.b, &state.bf, s, a)
}

pub fn modified_energy_of(
    v: &SpectralVectorField,
    b: &SpectralVectorField,
    bf: &BackgroundField,
    s: u32,
    a: f64,
) -> f64 {
    let hs = SobolevIndex::inhomogeneous(s as f64);
    a * (sobolev_norm_sq(v, hs) + sobolev_norm_sq(b, hs)) - modified_energy_cross_term(v, b, bf, s)
}

/// The two-sided bound `1/2 X <= Q_s <= (a + |b|/2) X` with
/// `X = ||(v, b)||^2_{H^s}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl EnvelopeCheck {
    pub fn holds(&self) -> bool {
        self.lower <= self.value && self.value <= self.upper
    }
}

pub fn modified_energy_envelope(
    v: &SpectralVectorField,
    b: &SpectralVectorField,
    bf: &BackgroundField,
    s: u32,
    a: f64,
) -> EnvelopeCheck {
    let hs = SobolevIndex::inhomogeneous(s as f64);
    let x = sobolev_norm_sq(v, hs) + sobolev_norm_sq(b, hs);
    EnvelopeCheck {
        lower: 0.5 * x,
        value: modified_energy_of(v, b, bf, s, a),
        upper: (a + 0.5 * bf.magnitude()) * x,
    }
}

/// Observation of `(v, b)` at time `t` with the requested norms and
/// modified-energy levels; damping and extras are supplied by the caller.
pub fn observe(
    v: &SpectralVectorField,
    b: &SpectralVectorField,
    bf: &BackgroundField,
    t: f64,
    norms: &[NormKey],
    q_levels: &[u32],
    a: f64,
) -> ObservationRow {
    ObservationRow {
        t,
        norms: norms.iter().map(|k| (*k, k.evaluate(v, b))).collect(),
        q_s: q_levels
            .iter()
            .map(|&s| (s, modified_energy_of(v, b, bf, s, a)))
            .collect(),
        cumulative_damping: 0.0,
        extras: Vec::new(),
        div_residual: v.div_residual().max(b.div_residual()),
        mean_residual: v.mean_residual().max(b.mean_residual()),
        hermitian_residual: v.hermitian_residual().max(b.hermitian_residual()),
    }
}

/// `t_0 rho^k` for `k = 0, 1, ...` up to `t_max`, with `t_max` appended.
pub fn geometric_times(t0: f64, rho: f64, t_max: f64) -> Result<Vec<f64>> {
    if !(t0 > 0.0 && rho > 1.0 && t_max >= t0) {
        return precondition(format!(
            "invalid geometric grid t0 = {t0}, rho = {rho}, t_max = {t_max}"
        ));
    }
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let t = t0 * rho.powi(k);
        if t >= t_max * (1.0 - 1e-12) {
            break;
        }
        out.push(t);
        k += 1;
    }
    out.push(t_max);
    Ok(out)
}

/// Algebraic decay fit of one observed quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub key: String,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Least-squares slope of `log(norm)` against `log(1 + t)`.
    pub fitted_exponent: f64,
    /// `max norm (1 + t)^p` over the window, `p` the theorem exponent.
    pub fitted_c: f64,
    pub theorem_exponent: f64,
    /// Least-squares slope of `log(norm (1 + t)^p)`; equals
    /// `fitted_exponent + p`.
    pub curve_slope: f64,
    /// The curve shows no growth: finite and `curve_slope <= SLOPE_TOLERANCE`.
    pub bound_satisfied: bool,
    pub samples: usize,
    /// Set when samples at the numerical floor were dropped.
    pub truncated: bool,
}

/// Growth allowed in the log-log slope of a bound curve.
pub const SLOPE_TOLERANCE: f64 = 0.05;

/// Minimum samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 8;

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Fits `values(t) ~ C (1 + t)^{-p}` on `window`.
///
/// Samples are truncated at the first value below [`NORM_FLOOR`]; at least
/// [`MIN_FIT_SAMPLES`] must remain.
pub fn fit_decay_series(
    key: &str,
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
    theorem_exponent: f64,
) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Dimension("times and values differ in length".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut curve = Vec::new();
    let mut truncated = false;
    for (&t, &y) in times.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(y >= NORM_FLOOR) {
            truncated = true;
            break;
        }
        let x = (1.0 + t).ln();
        xs.push(x);
        ys.push(y.ln());
        curve.push(y * (1.0 + t).powf(theorem_exponent));
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return precondition(format!(
            "{key}: {} usable samples in [{}, {}], need {MIN_FIT_SAMPLES}",
            xs.len(),
            window.0,
            window.1
        ));
    }
    let fitted_exponent = least_squares_slope(&xs, &ys);
    let fitted_c = curve.iter().copied().fold(0.0, f64::max);
    let curve_slope = fitted_exponent + theorem_exponent;
    Ok(DecayFit {
        key: key.to_string(),
        t_lo: window.0,
        t_hi: window.1,
        fitted_exponent,
        fitted_c,
        theorem_exponent,
        curve_slope,
        bound_satisfied: fitted_c.is_finite() && curve_slope <= SLOPE_TOLERANCE,
        samples: xs.len(),
        truncated,
    })
}

/// [`fit_decay_series`] on the column `key` of observation rows.
pub fn fit_decay(rows: &[ObservationRow], key: &str, window: (f64, f64), theorem_exponent: f64) -> Result<DecayFit> {
    let mut times = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for row in rows {
        let v = row
            .get(key)
            .ok_or_else(|| Error::Precondition(format!("no column {key} in observations")))?;
        times.push(row.t);
        values.push(v);
    }
    fit_decay_series(key, &times, &values, window, theorem_exponent)
}

/// Header used for an empty series.
fn base_header() -> Vec<String> {
    let mut h = vec!["t".to_string(), "cumulative_damping".to_string()];
    h.extend(FIXED_TAIL.iter().map(|s| s.to_string()));
    h
}

/// Writes the header and one line per row; floats carry 17 significant
/// digits so parsing them back is exact.
pub fn write_csv(rows: &[ObservationRow], mut out: impl Write) -> Result<()> {
    let header: Vec<String> = match rows.first() {
        Some(row) => row.columns().into_iter().map(|(l, _)| l).collect(),
        None => base_header(),
    };
    if let Some(bad) = header.iter().find(|h| h.contains(',') || h.contains('\n')) {
        return Err(Error::Format(format!("column label {bad:?} is not CSV-safe")));
    }
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cols = row.columns();
        if cols.len() != header.len() || cols.iter().zip(&header).any(|((l, _), h)| l != h) {
            return Err(Error::Format(format!("row at t = {} has different columns", row.t)));
        }
        let line: Vec<String> = cols.iter().map(|(_, v)| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn emit_csv(rows: &[ObservationRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(rows, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Parses what [`write_csv`] produced.
pub fn parse_csv(input: impl BufRead) -> Result<Vec<ObservationRow>> {
    let mut lines = input.lines();
    let header: Vec<String> = match lines.next() {
        Some(line) => line?.split(',').map(str::to_string).collect(),
        None => return Err(Error::Format("missing CSV header".into())),
    };
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|x| x.parse::<f64>().map_err(|_| Error::Format(format!("bad number {x:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != header.len() {
            return Err(Error::Format("row width differs from header".into()));
        }
        let mut row = ObservationRow {
            t: 0.0,
            norms: Vec::new(),
            q_s: Vec::new(),
            cumulative_damping: 0.0,
            extras: Vec::new(),
            div_residual: 0.0,
            mean_residual: 0.0,
            hermitian_residual: 0.0,
        };
        let mut seen_damping = false;
        for (label, value) in header.iter().zip(values) {
            match label.as_str() {
                "t" => row.t = value,
                "cumulative_damping" => {
                    row.cumulative_damping = value;
                    seen_damping = true;
                }
                "div_residual" => row.div_residual = value,
                "mean_residual" => row.mean_residual = value,
                "hermitian_residual" => row.hermitian_residual = value,
                other => {
                    if let Some(level) = other.strip_prefix("Q_").and_then(|s| s.parse::<u32>().ok()) {
                        row.q_s.push((level, value));
                    } else if let (false, Ok(key)) = (seen_damping, other.parse::<NormKey>()) {
                        row.norms.push((key, value));
                    } else {
                        row.extras.push((other.to_string(), value));
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ObservationRow>> {
    let file = std::fs::File::open(path)?;
    parse_csv(std::io::BufReader::new(file))
}
