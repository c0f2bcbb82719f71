//! Runs one configured experiment and writes its artifacts.
//!
//! Every experiment writes `manifest.json` (config echo, version, wall time,
//! summary) next to its data files in `output_dir`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Experiment, ExperimentConfig};
use crate::diagnostics::{
    default_modified_energy_weight, emit_csv, fit_decay, geometric_times, modified_energy_envelope, observe, DecayFit,
    FieldKind, NormKey, ObservationRow,
};
use crate::diophantine::{estimate_constant, near_resonances, BackgroundField};
use crate::error::{Error, Result};
use crate::kernels::{default_time_grid, sweep_bounds};
use crate::propagator::{evolve_linear, linear_dissipation, Integrand};
use crate::solver::{
    make_initial_data, run, save_checkpoint, IntegratorConfig, SimulationState, DIV_TOLERANCE, HERMITIAN_TOLERANCE,
};
use crate::spectral::{sobolev_norm_sq, SobolevIndex, SpectralGrid, SpectralVectorField};

/// Process exit status of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    Failure,
    Validation,
    BlowUp,
    Io,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failure => 1,
            ExitStatus::Validation => 2,
            ExitStatus::BlowUp => 3,
            ExitStatus::Io => 4,
        }
    }

    pub fn of_error(err: &Error) -> Self {
        match err {
            Error::Config(_)
            | Error::Precondition(_)
            | Error::Grid(_)
            | Error::Dimension(_)
            | Error::ResonantBackground { .. } => ExitStatus::Validation,
            Error::BlowUp { .. } => ExitStatus::BlowUp,
            Error::Io(_) => ExitStatus::Io,
            Error::Format(_) | Error::Json(_) => ExitStatus::Failure,
        }
    }
}

/// Files written and the summary recorded in the manifest.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub artifacts: Vec<PathBuf>,
    pub summary: Value,
    pub wall_seconds: f64,
}

struct Body {
    artifacts: Vec<PathBuf>,
    summary: Value,
    /// Blow-up message of an aborted run; artifacts are still written.
    abort: Option<String>,
}

/// Runs `cfg` and maps the result to an exit status, reporting errors on
/// stderr.
pub fn run_experiment(cfg: &ExperimentConfig) -> ExitStatus {
    match execute(cfg) {
        Ok(_) => ExitStatus::Success,
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::of_error(&e)
        }
    }
}

/// Runs `cfg`, writing data files and `manifest.json` into `cfg.output_dir`.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.output_dir)?;
    let body = match cfg.experiment {
        Experiment::LinearDecay => linear_decay(cfg)?,
        Experiment::Nonlinear => nonlinear(cfg)?,
        Experiment::KernelSweep => kernel_sweep(cfg)?,
        Experiment::DiophantineEstimate => diophantine_estimate(cfg)?,
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    let names: Vec<String> = body
        .artifacts
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let manifest = json!({
        "experiment": cfg.experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "config_text": cfg.to_file_string(),
        "wall_time_seconds": wall_seconds,
        "status": if body.abort.is_some() { "blow-up" } else { "ok" },
        "artifacts": names,
        "summary": body.summary,
    });
    let manifest_path = cfg.output_dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    if let Some(reason) = body.abort {
        return Err(Error::BlowUp {
            t: f64::NAN,
            step: 0,
            reason,
        });
    }
    let mut artifacts = body.artifacts;
    artifacts.push(manifest_path);
    Ok(ExperimentOutcome {
        artifacts,
        summary: body.summary,
        wall_seconds,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn setup(cfg: &ExperimentConfig) -> Result<(SpectralGrid, BackgroundField, SpectralVectorField, SpectralVectorField)> {
    let grid = SpectralGrid::new(cfg.dim, cfg.grid)?;
    let bf = estimate_constant(&cfg.btilde, cfg.r, cfg.lattice_radius)?;
    let (v, b) = make_initial_data(&grid, &bf, cfg.m, cfg.epsilon, cfg.spectrum_slope, cfg.seed)?;
    Ok((grid, bf, v, b))
}

fn push_unique(keys: &mut Vec<NormKey>, key: NormKey) {
    if !keys.contains(&key) {
        keys.push(key);
    }
}

/// Fits each `(column, exponent)`; failures are reported, not fatal.
fn fits_json(rows: &[ObservationRow], targets: &[(String, f64)], window: (f64, f64)) -> (Vec<DecayFit>, Value) {
    let mut fits = Vec::new();
    let mut errors = Vec::new();
    for (key, p) in targets {
        match fit_decay(rows, key, window, *p) {
            Ok(fit) => fits.push(fit),
            Err(e) => errors.push(json!({ "key": key, "error": e.to_string() })),
        }
    }
    let value = json!({ "window": [window.0, window.1], "fits": fits, "errors": errors });
    (fits, value)
}

fn residual_summary(rows: &[ObservationRow]) -> Value {
    let max = |f: fn(&ObservationRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let div = max(|r| r.div_residual);
    let mean = max(|r| r.mean_residual);
    let herm = max(|r| r.hermitian_residual);
    json!({
        "div_residual": div,
        "mean_residual": mean,
        "hermitian_residual": herm,
        "thresholds": { "div_residual": DIV_TOLERANCE, "mean_residual": 0.0, "hermitian_residual": HERMITIAN_TOLERANCE },
        "within_thresholds": div < DIV_TOLERANCE && mean == 0.0 && herm < HERMITIAN_TOLERANCE,
    })
}

/// Q_s envelope observation with the modified energy stored in the row.
struct EnvelopeTally {
    holds: bool,
    worst_lower: f64,
    worst_upper: f64,
}

impl EnvelopeTally {
    fn new() -> Self {
        Self {
            holds: true,
            worst_lower: f64::INFINITY,
            worst_upper: 0.0,
        }
    }

    /// Fills `row.q_s` for `levels` and records the envelope.
    fn observe(
        &mut self,
        row: &mut ObservationRow,
        v: &SpectralVectorField,
        b: &SpectralVectorField,
        bf: &BackgroundField,
        levels: &[u32],
        a: f64,
    ) {
        for &s in levels {
            let e = modified_energy_envelope(v, b, bf, s, a);
            row.q_s.push((s, e.value));
            self.holds &= e.holds();
            if e.lower > 0.0 {
                self.worst_lower = self.worst_lower.min(e.value / e.lower);
                self.worst_upper = self.worst_upper.max(e.value / e.upper);
            }
        }
    }

    fn json(&self, a: f64) -> Value {
        json!({
            "a": a,
            "holds": self.holds,
            "min_q_over_lower": if self.worst_lower.is_finite() { Some(self.worst_lower) } else { None },
            "max_q_over_upper": self.worst_upper,
        })
    }
}

fn linear_decay(cfg: &ExperimentConfig) -> Result<Body> {
    let (_, bf, v0, h0) = setup(cfg)?;
    let m = cfg.m as f64;
    let hm = SobolevIndex::inhomogeneous(m);
    let mut times = vec![0.0];
    times.extend(geometric_times(cfg.t_first, cfg.time_ratio, cfg.t_end)?);

    let mut integrands = vec![Integrand::Velocity(hm)];
    integrands.extend(
        cfg.s_list
            .iter()
            .map(|&s| Integrand::Velocity(SobolevIndex::homogeneous(s))),
    );
    let cumulative = linear_dissipation(&v0, &h0, &bf, &times, &integrands)?;

    let mut norms = Vec::new();
    for &s in &cfg.s_list {
        let idx = SobolevIndex::homogeneous(s);
        for field in [FieldKind::V, FieldKind::B, FieldKind::Pair] {
            push_unique(&mut norms, NormKey::new(field, idx));
        }
    }
    push_unique(&mut norms, NormKey::new(FieldKind::Pair, hm));
    let levels: Vec<u32> = (0..=cfg.m).collect();
    let a = default_modified_energy_weight(&bf);
    let initial: Vec<f64> = cfg
        .s_list
        .iter()
        .map(|&s| {
            let idx = SobolevIndex::homogeneous(s);
            sobolev_norm_sq(&v0, idx) + sobolev_norm_sq(&h0, idx)
        })
        .collect();

    let mut envelope = EnvelopeTally::new();
    let mut max_identity = 0.0f64;
    let mut rows = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let (v, h) = evolve_linear(&v0, &h0, &bf, t)?;
        let mut row = observe(&v, &h, &bf, t, &norms, &[], a);
        envelope.observe(&mut row, &v, &h, &bf, &levels, a);
        row.cumulative_damping = cumulative[i][0];
        for (k, &s) in cfg.s_list.iter().enumerate() {
            let idx = SobolevIndex::homogeneous(s);
            let damped = cumulative[i][k + 1];
            let now = sobolev_norm_sq(&v, idx) + sobolev_norm_sq(&h, idx);
            let residual = (now + 2.0 * damped - initial[k]).abs() / initial[k].max(f64::MIN_POSITIVE);
            max_identity = max_identity.max(residual);
            let label = idx.label();
            row.extras.push((format!("int_v_{label}"), damped));
            row.extras.push((format!("identity_residual_{label}"), residual));
        }
        rows.push(row);
    }

    let monotone = cfg.s_list.iter().all(|&s| {
        let key = NormKey::new(FieldKind::Pair, SobolevIndex::homogeneous(s)).to_string();
        rows.windows(2)
            .all(|w| w[1].get(&key).unwrap_or(0.0) <= w[0].get(&key).unwrap_or(0.0) * (1.0 + 1e-12))
    });

    let mut targets = Vec::new();
    for &s in &cfg.s_list {
        let idx = SobolevIndex::homogeneous(s);
        let rate = (m - s) / (2.0 * cfg.r);
        targets.push((NormKey::new(FieldKind::B, idx).to_string(), rate));
        if s <= m - 1.0 {
            targets.push((NormKey::new(FieldKind::V, idx).to_string(), 0.5 + rate));
        }
    }
    let (_, fits) = fits_json(&rows, &targets, cfg.window());

    let csv = cfg.output_dir.join("linear_decay.csv");
    emit_csv(&rows, &csv)?;
    let summary = json!({
        "background": bf,
        "observations": rows.len(),
        "max_identity_residual": max_identity,
        "dissipation_monotone": monotone,
        "decay": fits,
        "residuals": residual_summary(&rows),
        "modified_energy_envelope": envelope.json(a),
    });
    let summary_path = cfg.output_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(Body {
        artifacts: vec![csv, summary_path],
        summary,
        abort: None,
    })
}

fn nonlinear(cfg: &ExperimentConfig) -> Result<Body> {
    let (_, bf, v0, b0) = setup(cfg)?;
    let m = cfg.m as f64;
    let hm = SobolevIndex::inhomogeneous(m);
    let l2 = SobolevIndex::homogeneous(0.0);
    let state = SimulationState::new(v0, b0, bf.clone())?;

    let integrator_cfg = IntegratorConfig {
        dt: cfg.dt,
        t_end: cfg.t_end,
        integrands: vec![
            Integrand::Velocity(hm),
            Integrand::Velocity(l2),
            Integrand::AdvectedMagnetic(hm),
            Integrand::Magnetic(SobolevIndex::inhomogeneous(m - 1.0 - cfg.r)),
        ],
        ..IntegratorConfig::default()
    };
    let mut norms = vec![
        NormKey::new(FieldKind::Pair, l2),
        NormKey::new(FieldKind::V, l2),
        NormKey::new(FieldKind::B, l2),
    ];
    for &s in &cfg.s_list {
        push_unique(
            &mut norms,
            NormKey::new(FieldKind::Pair, SobolevIndex::inhomogeneous(s)),
        );
    }
    push_unique(&mut norms, NormKey::new(FieldKind::Pair, hm));
    let levels: Vec<u32> = (0..=cfg.m).collect();
    let a = default_modified_energy_weight(&bf);
    let obs_times: Vec<f64> = (0..=cfg.observations)
        .map(|i| cfg.t_end * i as f64 / cfg.observations as f64)
        .collect();
    let energy0 = sobolev_norm_sq(&state.v, l2) + sobolev_norm_sq(&state.b, l2);

    let mut rows = Vec::with_capacity(obs_times.len());
    let mut envelope = EnvelopeTally::new();
    let mut sup_hm_sq = 0.0f64;
    let mut max_energy_residual = 0.0f64;
    let record = run(state, &integrator_cfg, &obs_times, |s, ints| {
        let mut row = observe(&s.v, &s.b, &s.bf, s.t, &norms, &[], a);
        envelope.observe(&mut row, &s.v, &s.b, &s.bf, &levels, a);
        row.cumulative_damping = ints[0];
        let energy = sobolev_norm_sq(&s.v, l2) + sobolev_norm_sq(&s.b, l2);
        let residual = (energy + 2.0 * ints[1] - energy0).abs();
        max_energy_residual = max_energy_residual.max(residual);
        sup_hm_sq = sup_hm_sq.max(sobolev_norm_sq(&s.v, hm) + sobolev_norm_sq(&s.b, hm));
        row.extras.push(("energy_law_residual".into(), residual));
        row.extras.push(("sup_vb_Hm_sq".into(), sup_hm_sq));
        row.extras.push(("int_adv_b_Hm_sq".into(), ints[2]));
        row.extras.push(("int_b_Hm1r_sq".into(), ints[3]));
        row.extras.push(("Em_sq".into(), sup_hm_sq + ints[0] + ints[2]));
        rows.push(row);
        Ok(())
    })?;

    let targets: Vec<(String, f64)> = cfg
        .s_list
        .iter()
        .map(|&s| {
            let key = NormKey::new(FieldKind::Pair, SobolevIndex::inhomogeneous(s)).to_string();
            (key, (m - s) / (2.0 * (1.0 + cfg.r)))
        })
        .collect();
    let (_, fits) = fits_json(&rows, &targets, cfg.window());

    let damping_at = |t: f64| {
        rows.iter()
            .rfind(|r| r.t <= t * (1.0 + 1e-12))
            .map_or(0.0, |r| r.cumulative_damping)
    };
    let last_t = rows.last().map_or(0.0, |r| r.t);
    let total = damping_at(last_t);
    let plateau = if total > 0.0 {
        (total - damping_at(0.1 * last_t)) / total
    } else {
        0.0
    };

    let csv = cfg.output_dir.join("nonlinear.csv");
    emit_csv(&rows, &csv)?;
    let ckpt = cfg.output_dir.join("final_state.ckpt");
    save_checkpoint(&record.state, &ckpt)?;
    let eps2 = cfg.epsilon * cfg.epsilon;
    let summary = json!({
        "background": bf,
        "steps": record.steps,
        "dt": record.dt,
        "t_final": record.state.t,
        "abort": record.abort,
        "observations": rows.len(),
        "sup_pair_Hm": sup_hm_sq.sqrt(),
        "sup_pair_Hm_over_epsilon": if cfg.epsilon > 0.0 { Some(sup_hm_sq.sqrt() / cfg.epsilon) } else { None },
        "cumulative_damping": total,
        "damping_last_decade_fraction": plateau,
        "energy_law_max_residual": max_energy_residual,
        "energy_law_max_residual_over_epsilon_sq": if eps2 > 0.0 { Some(max_energy_residual / eps2) } else { None },
        "decay": fits,
        "residuals": residual_summary(&rows),
        "modified_energy_envelope": envelope.json(a),
    });
    let summary_path = cfg.output_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(Body {
        artifacts: vec![csv, ckpt, summary_path],
        summary,
        abort: record.abort,
    })
}

fn kernel_sweep(cfg: &ExperimentConfig) -> Result<Body> {
    let bf = estimate_constant(&cfg.btilde, cfg.r, cfg.lattice_radius)?;
    let times = default_time_grid(cfg.t_end);
    let reports = sweep_bounds(&bf, cfg.lattice_radius, &times)?;
    let path = cfg.output_dir.join("kernel_bounds.json");
    write_json(
        &path,
        &json!({ "background": bf, "time_samples": times.len(), "reports": reports }),
    )?;
    let checked: Vec<_> = reports.iter().filter(|r| !r.informational && !r.empty).collect();
    let summary = json!({
        "reports": reports.len(),
        "all_finite": checked.iter().all(|r| r.c_empirical.is_finite()),
        "c_empirical": reports
            .iter()
            .map(|r| json!({
                "region": r.region.map(|g| g.name()),
                "kernel": r.kernel,
                "bound": r.bound_form,
                "c": r.c_empirical,
                "informational": r.informational,
            }))
            .collect::<Vec<_>>(),
    });
    Ok(Body {
        artifacts: vec![path],
        summary,
        abort: None,
    })
}

fn diophantine_estimate(cfg: &ExperimentConfig) -> Result<Body> {
    let bf = estimate_constant(&cfg.btilde, cfg.r, cfg.lattice_radius)?;
    let near = near_resonances(&bf, cfg.near_resonances);
    let report = json!({
        "btilde": bf.btilde,
        "r": bf.r,
        "J": bf.lattice_radius,
        "c_est": bf.c_est,
        "argmin_j": &bf.argmin[..bf.dim()],
        "exponent_in_theorem_range": bf.exponent_in_theorem_range(),
        "near_resonances": near,
    });
    let path = cfg.output_dir.join("diophantine.json");
    write_json(&path, &report)?;
    Ok(Body {
        artifacts: vec![path],
        summary: report,
        abort: None,
    })
}
