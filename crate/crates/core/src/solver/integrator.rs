use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rhs::{Nonlinearity, RhsEval};
use super::state::SimulationState;
use crate::diophantine::BackgroundField;
use crate::error::{precondition, Error, Result};
use crate::propagator::{
    apply_table, combine_mode, entry_integrals, mode_moments, propagator_table, Integrand, Propagator,
};
use crate::spectral::{leray_project_in_place, SobolevIndex, SpectralGrid, SpectralVectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Lawson-type integrating-factor RK4 with the exact per-mode propagator.
    IfRk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Fixed step; `None` picks the CFL step from the initial state.
    pub dt: Option<f64>,
    pub scheme: Scheme,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub dealias: bool,
    /// Observables integrated in time alongside the solution.
    pub integrands: Vec<Integrand>,
    /// Abort once the `L^2` norm exceeds this multiple of its initial value.
    pub blowup_factor: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: None,
            scheme: Scheme::IfRk4,
            cfl_safety: 0.5,
            t_end: 1.0,
            dealias: true,
            integrands: vec![Integrand::Velocity(SobolevIndex::homogeneous(0.0))],
            blowup_factor: 1e6,
        }
    }
}

impl IntegratorConfig {
    fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return precondition(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return precondition(format!("CFL safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return precondition(format!("t_end must be finite and >= 0, got {}", self.t_end));
        }
        if !(self.blowup_factor > 1.0) {
            return precondition("blow-up factor must exceed 1");
        }
        Ok(())
    }
}

/// Largest step allowed by the CFL condition at the given sup norms.
pub fn cfl_step(grid: &SpectralGrid, bf: &BackgroundField, safety: f64, vmax: f64, bmax: f64) -> f64 {
    let speed = vmax.max(bmax).max(bf.magnitude());
    safety * grid.spacing() / speed
}

/// Propagators for `h` and `h/2`, and the per-mode entry integrals over
/// `[0, h]` used for exact linear dissipation.
struct StepTables {
    full: Vec<Propagator>,
    half: Vec<Propagator>,
    integrals: Vec<[f64; 5]>,
}

/// Integrating-factor RK4 stepper with cached per-mode tables.
///
/// With `E(h) = exp(-Q h)` per mode and `R = -N`, one step is
///
/// ```text
/// k1 = R(u)                 a = E(h/2)(u + h/2 k1)
/// k2 = R(a)                 b = E(h/2) u + h/2 k2
/// k3 = R(b)                 c = E(h) u + h E(h/2) k3
/// k4 = R(c)
/// u' = E(h) u + h/6 (E(h) k1 + 2 E(h/2)(k2 + k3) + k4)
/// ```
///
/// Time integrals of quadratic observables split into the linear flow of
/// `u`, integrated exactly per mode, plus the deviation of the stage states
/// from it, integrated with the same RK weights.
pub struct Integrator {
    grid: SpectralGrid,
    bf: BackgroundField,
    cfg: IntegratorConfig,
    nl: Nonlinearity,
    /// `(on |v|^2, on |b|^2)` weights per integrand and mode.
    weights: Vec<Vec<(f64, f64)>>,
    thetas: Vec<f64>,
    tables: HashMap<u64, Arc<StepTables>>,
}

/// Outcome of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub h: f64,
    /// Increment of every configured integrand over the step.
    pub integrals: Vec<f64>,
}

impl Integrator {
    pub fn new(grid: &SpectralGrid, bf: &BackgroundField, cfg: &IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        if grid.dim() != bf.dim() {
            return Err(Error::Dimension(format!(
                "grid dimension {} vs background dimension {}",
                grid.dim(),
                bf.dim()
            )));
        }
        let thetas: Vec<f64> = (0..grid.len()).map(|idx| bf.dot(&grid.wavevector(idx))).collect();
        let weights = cfg
            .integrands
            .iter()
            .map(|f| {
                (0..grid.len())
                    .map(|idx| f.weights(grid.k2(idx), thetas[idx]))
                    .collect()
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            bf: bf.clone(),
            cfg: cfg.clone(),
            nl: Nonlinearity::new(grid, cfg.dealias),
            weights,
            thetas,
            tables: HashMap::new(),
        })
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    fn tables(&mut self, h: f64) -> Arc<StepTables> {
        if let Some(t) = self.tables.get(&h.to_bits()) {
            return t.clone();
        }
        if self.tables.len() >= 4 {
            self.tables.clear();
        }
        let integrals = self
            .thetas
            .par_iter()
            .map(|&theta| entry_integrals(theta, 0.0, h))
            .collect();
        let t = Arc::new(StepTables {
            full: propagator_table(&self.grid, &self.bf, h),
            half: propagator_table(&self.grid, &self.bf, 0.5 * h),
            integrals,
        });
        self.tables.insert(h.to_bits(), t.clone());
        t
    }

    fn rhs(&self, v: &SpectralVectorField, b: &SpectralVectorField, state: &SimulationState) -> Result<RhsEval> {
        self.nl.eval(v, b).map_err(|e| match e {
            Error::BlowUp { reason, .. } => Error::BlowUp {
                t: state.t,
                step: state.step_count,
                reason,
            },
            other => other,
        })
    }

    /// Sup norms of the state's fields.
    pub fn sup_norms(&self, state: &SimulationState) -> Result<(f64, f64)> {
        let e = self.rhs(&state.v, &state.b, state)?;
        Ok((e.vmax, e.bmax))
    }

    /// CFL step for the state.
    pub fn cfl_dt(&self, state: &SimulationState) -> Result<f64> {
        let (vmax, bmax) = self.sup_norms(state)?;
        Ok(cfl_step(&self.grid, &self.bf, self.cfg.cfl_safety, vmax, bmax))
    }

    fn weighted(&self, v: &SpectralVectorField, b: &SpectralVectorField) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| {
                let mut acc = 0.0;
                for k in 0..self.grid.dim() {
                    let (vc, bc) = (v.component(k), b.component(k));
                    for (idx, &(wv, wb)) in w.iter().enumerate() {
                        if wv != 0.0 {
                            acc += wv * vc[idx].norm_sqr();
                        }
                        if wb != 0.0 {
                            acc += wb * bc[idx].norm_sqr();
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// Advances `state` by exactly `h` (no CFL check).
    pub fn step_by(&mut self, state: &mut SimulationState, h: f64) -> Result<StepInfo> {
        if !(h > 0.0 && h.is_finite()) {
            return precondition(format!("step must be positive, got {h}"));
        }
        let k1 = self.rhs(&state.v, &state.b, state)?;
        self.finish_step(state, h, k1)
    }

    fn finish_step(&mut self, state: &mut SimulationState, h: f64, k1: RhsEval) -> Result<StepInfo> {
        let tables = self.tables(h);
        let (v0, b0) = (&state.v, &state.b);

        // a = E(h/2)(u + h/2 k1)
        let mut av = v0.clone();
        let mut ab = b0.clone();
        av.axpy(-0.5 * h, &k1.n1);
        ab.axpy(-0.5 * h, &k1.n2);
        apply_table(&tables.half, &mut av, &mut ab);
        let k2 = self.rhs(&av, &ab, state)?;

        // E(h/2) u
        let mut hv = v0.clone();
        let mut hb = b0.clone();
        apply_table(&tables.half, &mut hv, &mut hb);

        // b = E(h/2) u + h/2 k2
        let mut bv = hv.clone();
        let mut bb = hb.clone();
        bv.axpy(-0.5 * h, &k2.n1);
        bb.axpy(-0.5 * h, &k2.n2);
        let k3 = self.rhs(&bv, &bb, state)?;

        // E(h) u
        let mut fv = v0.clone();
        let mut fb = b0.clone();
        apply_table(&tables.full, &mut fv, &mut fb);

        // c = E(h) u + h E(h/2) k3
        let mut k3v = k3.n1.clone();
        let mut k3b = k3.n2.clone();
        apply_table(&tables.half, &mut k3v, &mut k3b);
        let mut cv = fv.clone();
        let mut cb = fb.clone();
        cv.axpy(-h, &k3v);
        cb.axpy(-h, &k3b);
        let k4 = self.rhs(&cv, &cb, state)?;

        // u' = E(h) u + h/6 (E(h) k1 + 2 E(h/2)(k2 + k3) + k4)
        let mut k1v = k1.n1;
        let mut k1b = k1.n2;
        apply_table(&tables.full, &mut k1v, &mut k1b);
        let mut midv = k2.n1;
        let mut midb = k2.n2;
        midv.axpy(1.0, &k3.n1);
        midb.axpy(1.0, &k3.n2);
        apply_table(&tables.half, &mut midv, &mut midb);
        let mut nv = fv.clone();
        let mut nb = fb.clone();
        nv.axpy(-h / 6.0, &k1v);
        nb.axpy(-h / 6.0, &k1b);
        nv.axpy(-h / 3.0, &midv);
        nb.axpy(-h / 3.0, &midb);
        nv.axpy(-h / 6.0, &k4.n1);
        nb.axpy(-h / 6.0, &k4.n2);

        // time integrals: exact linear part plus RK-weighted stage deviations
        let per_mode: Vec<(f64, f64)> = (0..self.grid.len())
            .into_par_iter()
            .map(|idx| {
                let moments = mode_moments(v0, b0, idx);
                if idx == 0 || (moments.0 == 0.0 && moments.1 == 0.0) {
                    (0.0, 0.0)
                } else {
                    combine_mode(&tables.integrals[idx], moments)
                }
            })
            .collect();
        let linear: Vec<f64> = self
            .weights
            .iter()
            .map(|w| {
                w.iter()
                    .zip(&per_mode)
                    .map(|(&(wv, wb), &(iv, ib))| wv * iv + wb * ib)
                    .sum()
            })
            .collect();
        let lin_half = self.weighted(&hv, &hb);
        let lin_full = self.weighted(&fv, &fb);
        let at_a = self.weighted(&av, &ab);
        let at_b = self.weighted(&bv, &bb);
        let at_c = self.weighted(&cv, &cb);
        let integrals = (0..self.weights.len())
            .map(|i| {
                let dev = 2.0 * (at_a[i] - lin_half[i]) + 2.0 * (at_b[i] - lin_half[i]) + (at_c[i] - lin_full[i]);
                linear[i] + h / 6.0 * dev
            })
            .collect();

        nv.enforce_hermitian();
        nb.enforce_hermitian();
        leray_project_in_place(&mut nv);
        leray_project_in_place(&mut nb);
        if !(nv.is_finite() && nb.is_finite()) {
            return Err(Error::BlowUp {
                t: state.t + h,
                step: state.step_count + 1,
                reason: "non-finite coefficients".into(),
            });
        }
        state.v = nv;
        state.b = nb;
        state.t += h;
        state.step_count += 1;
        Ok(StepInfo { h, integrals })
    }

    /// Advances by at most `h_max`: the configured step, shortened to the
    /// CFL limit when the state demands it.
    pub fn step(&mut self, state: &mut SimulationState, h_max: f64) -> Result<StepInfo> {
        let k1 = self.rhs(&state.v, &state.b, state)?;
        let cfl = cfl_step(&self.grid, &self.bf, self.cfg.cfl_safety, k1.vmax, k1.bmax);
        let h = h_max.min(cfl);
        if !(h > 0.0 && h.is_finite()) {
            return precondition(format!("step must be positive, got {h}"));
        }
        self.finish_step(state, h, k1)
    }
}

/// One IF-RK4 step of size `cfg.dt` (or the CFL step) from `state`.
pub fn step(state: &SimulationState, cfg: &IntegratorConfig) -> Result<SimulationState> {
    let mut integrator = Integrator::new(state.grid(), &state.bf, cfg)?;
    let h = match cfg.dt {
        Some(dt) => dt,
        None => integrator.cfl_dt(state)?,
    };
    let mut next = state.clone();
    integrator.step(&mut next, h)?;
    Ok(next)
}

/// Result of [`run`].
#[derive(Clone, Debug)]
pub struct RunRecord {
    /// Final state, or the last valid one after an abort.
    pub state: SimulationState,
    pub steps: u64,
    /// Accumulated integrals of the configured integrands.
    pub integrals: Vec<f64>,
    pub dt: f64,
    pub abort: Option<String>,
}

/// Integrates to `cfg.t_end`, calling `observer` with the state and the
/// accumulated integrals at every time in `obs_times` (sorted, within
/// `[0, t_end]`). Steps are shortened to land on observation times exactly.
///
/// A blow-up stops the run and is reported in the record; observer errors
/// and invalid inputs are returned as errors.
pub fn run(
    initial: SimulationState,
    cfg: &IntegratorConfig,
    obs_times: &[f64],
    mut observer: impl FnMut(&SimulationState, &[f64]) -> Result<()>,
) -> Result<RunRecord> {
    initial.validate()?;
    if obs_times.windows(2).any(|w| w[1] < w[0]) {
        return precondition("observation times must be sorted");
    }
    if obs_times.iter().any(|&t| t < initial.t || t > cfg.t_end) {
        return precondition("observation times must lie within the run window");
    }
    let mut integrator = Integrator::new(initial.grid(), &initial.bf, cfg)?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => integrator.cfl_dt(&initial)?,
    };
    let initial_norm = (initial.v.components().iter().chain(initial.b.components()))
        .flatten()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let threshold = cfg.blowup_factor * initial_norm;

    let mut state = initial;
    let mut integrals = vec![0.0; cfg.integrands.len()];
    let mut next_obs = 0;
    let mut abort = None;
    // relative slack for landing on a target time
    let snap = 1e-12 * cfg.t_end.max(1.0);
    loop {
        while next_obs < obs_times.len() && obs_times[next_obs] <= state.t + snap {
            observer(&state, &integrals)?;
            next_obs += 1;
        }
        if state.t >= cfg.t_end - snap {
            break;
        }
        let target = obs_times.get(next_obs).copied().unwrap_or(cfg.t_end).min(cfg.t_end);
        let remaining = target - state.t;
        let h = if remaining <= dt * (1.0 + 1e-12) { remaining } else { dt };
        let mut trial = state.clone();
        match integrator.step(&mut trial, h) {
            Ok(info) => {
                // land exactly on the target to avoid drift from repeated sums
                if (trial.t - target).abs() <= snap {
                    trial.t = target;
                }
                let norm = (trial.v.components().iter().chain(trial.b.components()))
                    .flatten()
                    .map(|c| c.norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                if initial_norm > 0.0 && norm > threshold {
                    abort = Some(format!(
                        "norm {norm:.3e} exceeded {:.0e} x initial at t = {}",
                        cfg.blowup_factor, trial.t
                    ));
                    break;
                }
                for (acc, inc) in integrals.iter_mut().zip(&info.integrals) {
                    *acc += inc;
                }
                state = trial;
            }
            Err(Error::BlowUp { t, step, reason }) => {
                abort = Some(format!("blow-up at t = {t} (step {step}): {reason}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunRecord {
        steps: state.step_count,
        state,
        integrals,
        dt,
        abort,
    })
}
