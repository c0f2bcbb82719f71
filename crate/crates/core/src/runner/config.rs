//! Flat `key = value` experiment configuration with presets.
//!
//! Resolution order, later wins: preset defaults, config file, command-line
//! overrides. `#` starts a comment. Lists are comma separated and may be
//! wrapped in brackets.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diophantine::{estimate_constant, preset_vector};
use crate::error::{Error, Result};
use crate::spectral::SpectralGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LinearDecay,
    Nonlinear,
    KernelSweep,
    DiophantineEstimate,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::LinearDecay,
        Experiment::Nonlinear,
        Experiment::KernelSweep,
        Experiment::DiophantineEstimate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::LinearDecay => "linear-decay",
            Experiment::Nonlinear => "nonlinear",
            Experiment::KernelSweep => "kernel-sweep",
            Experiment::DiophantineEstimate => "diophantine-estimate",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub preset: Option<String>,
    /// Spatial dimension `n`.
    pub dim: usize,
    /// Modes per axis `N`.
    pub grid: usize,
    pub btilde: Vec<f64>,
    pub r: f64,
    /// Lattice radius `J` for the Diophantine constant and kernel sweeps.
    pub lattice_radius: i64,
    pub m: u32,
    pub s_list: Vec<f64>,
    pub epsilon: f64,
    pub seed: u64,
    /// Fixed step; `None` selects the CFL step.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub output_dir: PathBuf,
    /// Initial spectrum decays like `|j|^{-spectrum_slope}`.
    pub spectrum_slope: f64,
    /// Uniformly spaced observations of a nonlinear run, excluding `t = 0`.
    pub observations: usize,
    /// Decay-fit window; `None` means `[t_end / 4, t_end]`.
    pub fit_window: Option<(f64, f64)>,
    /// First time and ratio of the geometric grid of a linear run.
    pub t_first: f64,
    pub time_ratio: f64,
    pub near_resonances: usize,
}

pub const PRESETS: [&str; 6] = [
    "2d-default",
    "3d-default",
    "linear-rates",
    "kernel-bounds",
    "nonlinear-small-data",
    "poincare-golden",
];

/// Ordered key list of the file format.
pub const KEYS: [&str; 20] = [
    "experiment",
    "preset",
    "n",
    "N",
    "btilde",
    "r",
    "J",
    "m",
    "s_list",
    "epsilon",
    "seed",
    "dt",
    "t_end",
    "output_dir",
    "spectrum_slope",
    "observations",
    "fit_window",
    "t_first",
    "time_ratio",
    "near_resonances",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset("2d-default").expect("built-in preset")
    }
}

impl ExperimentConfig {
    /// Built-in configuration named `name`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = ExperimentConfig {
            experiment: Experiment::Nonlinear,
            preset: Some(name.to_string()),
            dim: 2,
            grid: 64,
            btilde: preset_vector("sqrt2").expect("known vector"),
            r: 1.01,
            lattice_radius: 64,
            m: 6,
            s_list: vec![0.0, 1.0, 2.0],
            epsilon: 1e-3,
            seed: 1,
            dt: None,
            t_end: 100.0,
            output_dir: PathBuf::from("out"),
            spectrum_slope: 7.0,
            observations: 100,
            fit_window: None,
            t_first: 0.5,
            time_ratio: 1.1,
            near_resonances: 10,
        };
        let cfg = match name {
            "2d-default" => base,
            "3d-default" => ExperimentConfig {
                dim: 3,
                grid: 32,
                btilde: preset_vector("sqrt2-sqrt3").expect("known vector"),
                r: 2.01,
                lattice_radius: 32,
                m: 10,
                spectrum_slope: 11.0,
                t_end: 20.0,
                observations: 40,
                ..base
            },
            "linear-rates" => ExperimentConfig {
                experiment: Experiment::LinearDecay,
                m: 4,
                spectrum_slope: 5.0,
                t_end: 200.0,
                fit_window: Some((50.0, 200.0)),
                ..base
            },
            "kernel-bounds" => ExperimentConfig {
                experiment: Experiment::KernelSweep,
                lattice_radius: 32,
                ..base
            },
            "nonlinear-small-data" => ExperimentConfig {
                fit_window: Some((25.0, 100.0)),
                ..base
            },
            "poincare-golden" => ExperimentConfig {
                experiment: Experiment::DiophantineEstimate,
                btilde: preset_vector("golden").expect("known vector"),
                r: 1.0,
                lattice_radius: 512,
                ..base
            },
            _ => {
                return Err(Error::Config(format!(
                    "unknown preset {name:?}; available: {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    /// Fit window in effect.
    pub fn window(&self) -> (f64, f64) {
        self.fit_window.unwrap_or((0.25 * self.t_end, self.t_end))
    }

    /// Sets `key` from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let err = |what: &str| Error::Config(format!("key {key}: {what} (got {value:?})"));
        match key {
            "experiment" => self.experiment = value.parse()?,
            "preset" => {
                self.preset = match value {
                    "" | "none" => None,
                    name => Some(name.to_string()),
                }
            }
            "n" => self.dim = value.parse().map_err(|_| err("expected a dimension"))?,
            "N" => self.grid = value.parse().map_err(|_| err("expected a mode count"))?,
            "btilde" => self.btilde = parse_vector(value).map_err(|e| err(&e))?,
            "r" => self.r = parse_real(value).map_err(|e| err(&e))?,
            "J" => self.lattice_radius = value.parse().map_err(|_| err("expected an integer radius"))?,
            "m" => self.m = value.parse().map_err(|_| err("expected a nonnegative integer"))?,
            "s_list" => {
                self.s_list = split_list(value)
                    .iter()
                    .map(|s| parse_real(s))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| err(&e))?
            }
            "epsilon" => self.epsilon = parse_real(value).map_err(|e| err(&e))?,
            "seed" => self.seed = value.parse().map_err(|_| err("expected an unsigned integer"))?,
            "dt" => {
                self.dt = match value {
                    "auto" | "cfl" => None,
                    x => Some(parse_real(x).map_err(|e| err(&e))?),
                }
            }
            "t_end" => self.t_end = parse_real(value).map_err(|e| err(&e))?,
            "output_dir" => {
                if value.is_empty() {
                    return Err(err("empty path"));
                }
                self.output_dir = PathBuf::from(value)
            }
            "spectrum_slope" => self.spectrum_slope = parse_real(value).map_err(|e| err(&e))?,
            "observations" => self.observations = value.parse().map_err(|_| err("expected a count"))?,
            "fit_window" => {
                self.fit_window = match value {
                    "auto" => None,
                    _ => {
                        let parts = split_list(value);
                        if parts.len() != 2 {
                            return Err(err("expected two times"));
                        }
                        let lo = parse_real(&parts[0]).map_err(|e| err(&e))?;
                        let hi = parse_real(&parts[1]).map_err(|e| err(&e))?;
                        Some((lo, hi))
                    }
                }
            }
            "t_first" => self.t_first = parse_real(value).map_err(|e| err(&e))?,
            "time_ratio" => self.time_ratio = parse_real(value).map_err(|e| err(&e))?,
            "near_resonances" => self.near_resonances = value.parse().map_err(|_| err("expected a count"))?,
            _ => {
                return Err(Error::Config(format!(
                    "unknown key {key:?}; known keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Resolves a configuration from an optional preset, file contents and
    /// `(key, value)` overrides, then validates it.
    pub fn resolve(preset: Option<&str>, file: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let file_entries = match file {
            Some(text) => parse_entries(text)?,
            None => Vec::new(),
        };
        // the preset itself follows the same precedence as any other key
        let preset_name = overrides
            .iter()
            .rev()
            .chain(file_entries.iter().rev())
            .find(|(k, _)| k == "preset")
            .map(|(_, v)| v.as_str())
            .or(preset)
            .unwrap_or("2d-default");
        let mut cfg = match preset_name {
            "none" | "" => ExperimentConfig {
                preset: None,
                ..Self::preset("2d-default")?
            },
            name => Self::preset(name)?,
        };
        for (k, v) in file_entries.iter().chain(overrides) {
            if k != "preset" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, preset: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("cannot read config {}: {e}", path.display())))?;
        Self::resolve(preset, Some(&text), overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.dim == 2 || self.dim == 3) {
            return bad(format!("key n: dimension must be 2 or 3, got {}", self.dim));
        }
        if let Err(e) = SpectralGrid::new(self.dim, self.grid) {
            return bad(format!("key N: {e}"));
        }
        if self.btilde.len() != self.dim {
            return bad(format!(
                "key btilde: {} components for dimension {}",
                self.btilde.len(),
                self.dim
            ));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("key r: must be positive, got {}", self.r));
        }
        if self.lattice_radius < 1 {
            return bad(format!("key J: must be at least 1, got {}", self.lattice_radius));
        }
        if self.m == 0 {
            return bad("key m: must be at least 1".into());
        }
        if self.s_list.is_empty() {
            return bad("key s_list: empty".into());
        }
        if let Some(s) = self.s_list.iter().find(|&&s| !(s >= 0.0 && s <= self.m as f64)) {
            return bad(format!("key s_list: {s} outside [0, m = {}]", self.m));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("key epsilon: must be finite and >= 0, got {}", self.epsilon));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("key dt: must be positive, got {dt}"));
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("key t_end: must be positive, got {}", self.t_end));
        }
        if !self.spectrum_slope.is_finite() {
            return bad("key spectrum_slope: must be finite".into());
        }
        if self.observations == 0 {
            return bad("key observations: must be at least 1".into());
        }
        if let Some((lo, hi)) = self.fit_window {
            if !(lo >= 0.0 && lo < hi && hi <= self.t_end) {
                return bad(format!("key fit_window: [{lo}, {hi}] not inside [0, t_end]"));
            }
        }
        if !(self.t_first > 0.0 && self.t_first <= self.t_end) {
            return bad(format!("key t_first: must lie in (0, t_end], got {}", self.t_first));
        }
        if !(self.time_ratio > 1.0 && self.time_ratio.is_finite()) {
            return bad(format!("key time_ratio: must exceed 1, got {}", self.time_ratio));
        }
        // rational directions are caught here rather than mid-run
        match estimate_constant(&self.btilde, self.r, self.lattice_radius) {
            Ok(_) => Ok(()),
            Err(Error::ResonantBackground { j, dot }) => {
                bad(format!("key btilde: resonant, |btilde.j| = {dot:e} at j = {j:?}"))
            }
            Err(e) => bad(format!("key btilde: {e}")),
        }
    }

    /// The configuration in file format; parsing it back gives `self`.
    pub fn to_file_string(&self) -> String {
        let list = |xs: &[f64]| xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("experiment", self.experiment.to_string());
        line("preset", self.preset.clone().unwrap_or_else(|| "none".into()));
        line("n", self.dim.to_string());
        line("N", self.grid.to_string());
        line("btilde", list(&self.btilde));
        line("r", format!("{:?}", self.r));
        line("J", self.lattice_radius.to_string());
        line("m", self.m.to_string());
        line("s_list", list(&self.s_list));
        line("epsilon", format!("{:?}", self.epsilon));
        line("seed", self.seed.to_string());
        line("dt", self.dt.map_or("auto".into(), |dt| format!("{dt:?}")));
        line("t_end", format!("{:?}", self.t_end));
        line("output_dir", self.output_dir.display().to_string());
        line("spectrum_slope", format!("{:?}", self.spectrum_slope));
        line("observations", self.observations.to_string());
        line(
            "fit_window",
            self.fit_window.map_or("auto".into(), |(a, b)| format!("{a:?}, {b:?}")),
        );
        line("t_first", format!("{:?}", self.t_first));
        line("time_ratio", format!("{:?}", self.time_ratio));
        line("near_resonances", self.near_resonances.to_string());
        out
    }
}

/// `(key, value)` pairs of a config file, in order.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key {k:?}", lineno + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits `KEY=VALUE` from the command line.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {arg:?} is not key=value")))?;
    let k = k.trim();
    if !KEYS.contains(&k) {
        return Err(Error::Config(format!("unknown key {k:?}")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn split_list(value: &str) -> Vec<String> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// A real number, `sqrt(x)`, `phi`, optionally negated.
pub fn parse_real(text: &str) -> std::result::Result<f64, String> {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix('-') {
        return parse_real(rest).map(|x| -x);
    }
    let x = if t == "phi" {
        0.5 * (1.0 + 5f64.sqrt())
    } else if let Some(arg) = t.strip_prefix("sqrt(").and_then(|a| a.strip_suffix(')')) {
        let inner = parse_real(arg)?;
        if inner < 0.0 {
            return Err(format!("sqrt of negative number {inner}"));
        }
        inner.sqrt()
    } else {
        t.parse::<f64>().map_err(|_| format!("not a number: {t:?}"))?
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("not finite: {t:?}"))
    }
}

/// A comma list of reals or a named vector (`sqrt2`, `golden`, `sqrt2-sqrt3`).
pub fn parse_vector(text: &str) -> std::result::Result<Vec<f64>, String> {
    if let Some(v) = preset_vector(text.trim()) {
        return Ok(v);
    }
    let parts = split_list(text);
    if parts.is_empty() {
        return Err("empty vector".into());
    }
    parts.iter().map(|p| parse_real(p)).collect()
}
