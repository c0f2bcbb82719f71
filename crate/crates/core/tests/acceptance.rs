//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use torus_mhd::diagnostics::{fit_decay, read_csv, ObservationRow};
use torus_mhd::diophantine::{estimate_constant, preset_vector, verify_poincare};
use torus_mhd::kernels::{default_time_grid, sweep_bounds, Kernel};
use torus_mhd::propagator::{evolve_linear, linear_dissipation, propagator_matrix, Integrand, ModeDecomposition};
use torus_mhd::runner::{execute, ExperimentConfig};
use torus_mhd::solver::{make_initial_data, nonlinear_rhs, run, IntegratorConfig, SimulationState};
use torus_mhd::spectral::{sobolev_norm_sq, SobolevIndex, SpectralGrid, SpectralVectorField};

type Outcome = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn propagator_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pairs: Vec<(f64, f64)> = (0..10_000)
        .map(|_| (rng.random_range(0.0..=3.0), rng.random_range(0.0..=50.0)))
        .collect();
    // |1 - 4 theta^2| < 1e-6 near theta = 1/2
    pairs.extend((0..100).map(|_| (0.5 + rng.random_range(-2.4e-7..2.4e-7), rng.random_range(0.0..=50.0))));
    let mut worst = 0.0f64;
    let mut near = 0;
    for &(theta, t) in &pairs {
        if (1.0 - 4.0 * theta * theta).abs() < 1e-6 {
            near += 1;
        }
        let m = propagator_matrix(&ModeDecomposition::from_theta(theta), t).map_err(err)?;
        worst = worst.max(common::matrix_rel_err(&m, &common::propagator_oracle(theta, t)));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-10 && near >= 100 && secs < 10.0,
        format!(
            "{} pairs ({near} near-degenerate), max rel err {worst:.2e}, {secs:.2}s",
            pairs.len()
        ),
    ))
}

fn kernel_bounds() -> Outcome {
    let start = Instant::now();
    let bf = estimate_constant(&preset_vector("sqrt2").unwrap(), 1.01, 32).map_err(err)?;
    let reports = sweep_bounds(&bf, 32, &default_time_grid(100.0)).map_err(err)?;
    let finite = reports.iter().all(|r| r.c_empirical.is_finite());
    let g3 = reports
        .iter()
        .find(|r| r.kernel == Kernel::G3)
        .ok_or("no G3 report")?
        .c_empirical;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        finite && g3 <= 1.0 + 1e-12 && secs < 30.0,
        format!(
            "{} reports all finite: {finite}, C(G3) = {g3:.15}, {secs:.2}s",
            reports.len()
        ),
    ))
}

fn linear_energy_identity() -> Outcome {
    let grid = SpectralGrid::new(2, 64).map_err(err)?;
    let bf = estimate_constant(&preset_vector("sqrt2").unwrap(), 1.01, 64).map_err(err)?;
    let (v0, h0) = make_initial_data(&grid, &bf, 4, 1.0, 5.0, 7).map_err(err)?;
    // 20 geometric times from 0.5 to 50
    let times: Vec<f64> = (0..20).map(|k| 0.5 * 100f64.powf(k as f64 / 19.0)).collect();
    let orders = [0.0, 1.0, 2.0];
    let integrands: Vec<Integrand> = orders
        .iter()
        .map(|&s| Integrand::Velocity(SobolevIndex::homogeneous(s)))
        .collect();
    let ints = linear_dissipation(&v0, &h0, &bf, &times, &integrands).map_err(err)?;
    let mut worst = 0.0f64;
    for (k, &t) in times.iter().enumerate() {
        let (v, h) = evolve_linear(&v0, &h0, &bf, t).map_err(err)?;
        for (i, &s) in orders.iter().enumerate() {
            let idx = SobolevIndex::homogeneous(s);
            let e0 = sobolev_norm_sq(&v0, idx) + sobolev_norm_sq(&h0, idx);
            let e = sobolev_norm_sq(&v, idx) + sobolev_norm_sq(&h, idx);
            worst = worst.max((e + 2.0 * ints[k][i] - e0).abs() / e0);
        }
    }
    Ok((
        worst < 1e-8,
        format!("max relative residual {worst:.2e} over s = 0, 1, 2"),
    ))
}

fn run_preset(name: &str, dir: &Path) -> Result<(Value, Duration), String> {
    let mut cfg = ExperimentConfig::preset(name).map_err(err)?;
    cfg.output_dir = dir.to_path_buf();
    let start = Instant::now();
    let outcome = execute(&cfg).map_err(err)?;
    Ok((outcome.summary, start.elapsed()))
}

fn fit_for<'a>(summary: &'a Value, key: &str) -> Option<&'a Value> {
    summary["decay"]["fits"].as_array()?.iter().find(|f| f["key"] == key)
}

fn linear_rates(dir: &Path) -> Outcome {
    let (summary, elapsed) = run_preset("linear-rates", dir)?;
    let fit = fit_for(&summary, "b_Hdot0").ok_or("no b_Hdot0 fit")?;
    let exponent = fit["fitted_exponent"].as_f64().ok_or("missing exponent")?;
    let theorem = fit["theorem_exponent"].as_f64().ok_or("missing theorem exponent")?;
    let slope = fit["curve_slope"].as_f64().ok_or("missing slope")?;
    let expected = 4.0 / (2.0 * 1.01);
    let secs = elapsed.as_secs_f64();
    Ok((
        (theorem - expected).abs() < 1e-12 && exponent <= -expected + 0.3 && slope <= 0.05 && secs < 120.0,
        format!("exponent {exponent:.3} vs -{expected:.3} + 0.3, bound curve slope {slope:.3}, {secs:.1}s"),
    ))
}

fn column(rows: &[ObservationRow], label: &str) -> Result<Vec<f64>, String> {
    rows.iter()
        .map(|r| r.get(label).ok_or_else(|| format!("missing column {label}")))
        .collect()
}

struct NonlinearRun {
    rows: Vec<ObservationRow>,
    summary: Value,
    elapsed: Duration,
}

fn nonlinear_run(dir: &Path) -> Result<NonlinearRun, String> {
    let (summary, elapsed) = run_preset("nonlinear-small-data", dir)?;
    let rows = read_csv(&dir.join("nonlinear.csv")).map_err(err)?;
    Ok(NonlinearRun { rows, summary, elapsed })
}

const EPS: f64 = 1e-3;

fn nonlinear_stability(run: &NonlinearRun) -> Outcome {
    let rows = &run.rows;
    let sup = column(rows, "vb_H6")?.into_iter().fold(0.0, f64::max);
    let damping_at = |t: f64| {
        rows.iter()
            .rfind(|r| r.t <= t + 1e-9)
            .map_or(0.0, |r| r.cumulative_damping)
    };
    let t_end = rows.last().ok_or("no rows")?.t;
    let total = damping_at(t_end);
    let plateau = (total - damping_at(0.1 * t_end)) / total;
    let energy = column(rows, "energy_law_residual")?.into_iter().fold(0.0, f64::max);
    let secs = run.elapsed.as_secs_f64();
    let reached = (t_end - 100.0).abs() < 1e-9 && run.summary["abort"].is_null();
    Ok((
        reached && sup <= 3.0 * EPS && plateau < 0.05 && energy < 1e-8 * EPS * EPS && secs < 600.0,
        format!(
            "sup H6 = {:.3} eps, last-decade damping {:.3}%, energy residual {:.2e} eps^2, {secs:.1}s",
            sup / EPS,
            100.0 * plateau,
            energy / (EPS * EPS)
        ),
    ))
}

fn nonlinear_decay(run: &NonlinearRun) -> Outcome {
    let p = 6.0 / (2.0 * (1.0 + 1.01));
    let fit = fit_decay(&run.rows, "vb_Hdot0", (25.0, 100.0), p).map_err(err)?;
    Ok((
        fit.curve_slope.is_finite() && fit.curve_slope <= 0.05,
        format!(
            "L2 exponent {:.3} (rate {p:.3}), bound curve slope {:.3} over {} samples",
            fit.fitted_exponent, fit.curve_slope, fit.samples
        ),
    ))
}

fn structural_invariants(run: &NonlinearRun) -> Outcome {
    let rows = &run.rows;
    let div = rows.iter().map(|r| r.div_residual).fold(0.0, f64::max);
    let mean = rows.iter().map(|r| r.mean_residual).fold(0.0, f64::max);
    let herm = rows.iter().map(|r| r.hermitian_residual).fold(0.0, f64::max);
    // Envelope recomputed from the logged norms: |b| = sqrt(3) for (1, sqrt 2).
    let b = 3f64.sqrt();
    let a = 1.0 + b / 2.0 + b * b / 2.0;
    let mut envelope = true;
    let mut checked = 0;
    for row in rows {
        for level in [0u32, 1, 2, 6] {
            let x = row.get(&format!("vb_H{level}")).ok_or("missing pair norm")?.powi(2);
            let q = row.get(&format!("Q_{level}")).ok_or("missing Q column")?;
            envelope &= 0.5 * x <= q * (1.0 + 1e-12) && q <= (a + b / 2.0) * x * (1.0 + 1e-12);
            checked += 1;
        }
    }
    let reported = run.summary["modified_energy_envelope"]["holds"] == true;
    Ok((
        div < 1e-12 && mean == 0.0 && herm < 1e-13 && envelope && reported && !rows.is_empty(),
        format!(
            "{} observations: div {div:.1e}, mean {mean:.1e}, hermitian {herm:.1e}, envelope {envelope} ({checked} checks)",
            rows.len()
        ),
    ))
}

fn solenoidal_mode(grid: &SpectralGrid, j: &[i64]) -> Result<SpectralVectorField, String> {
    let w = [C::new(-(j[1] as f64), 0.0), C::new(j[0] as f64, 0.0)];
    let mut g = SpectralVectorField::zeros(grid);
    g.set_mode_pair(j, &w).map_err(err)?;
    Ok(g)
}

fn grid_for_band(band: i64) -> Result<SpectralGrid, String> {
    let n = (2 * band as usize + 2).max(8);
    SpectralGrid::new(2, n + n % 2).map_err(err)
}

fn diophantine_poincare() -> Outcome {
    let golden = preset_vector("golden").unwrap();
    let radii = [64i64, 128, 256, 512];
    let mut constants = Vec::new();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_saturation = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for &radius in &radii {
        let bf = estimate_constant(&golden, 1.0, radius).map_err(err)?;
        constants.push(bf.c_est);
        // 25 fields per radius, each inside the cube inscribed in the certified ball
        let max_band = (radius as f64 / 2f64.sqrt()).floor() as i64;
        for _ in 0..25 {
            let band = rng.random_range(1..=max_band.min(96));
            let grid = grid_for_band(band)?;
            let g = common::random_solenoidal(&grid, band, rng.random());
            let s = rng.random_range(0.0..2.0);
            let ratio = verify_poincare(&bf, &g, s).map_err(err)?;
            worst_excess = worst_excess.max(ratio - 1.0 / bf.c_est);
        }
        let j = &bf.argmin[..2];
        let band = j.iter().map(|a| a.abs()).max().unwrap();
        let g = solenoidal_mode(&grid_for_band(band)?, j)?;
        let ratio = verify_poincare(&bf, &g, 0.0).map_err(err)?;
        worst_saturation = worst_saturation.max(common::rel_err(ratio, 1.0 / bf.c_est));
    }
    let lo = constants.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = constants.iter().cloned().fold(0.0, f64::max);
    let spread = (hi - lo) / hi;
    Ok((
        spread < 0.05 && worst_excess <= 1e-12 && worst_saturation < 1e-12,
        format!(
            "c_est {constants:.5?} spread {:.2}%, max ratio - 1/c {worst_excess:.2e}, argmin saturation err {worst_saturation:.1e}",
            100.0 * spread
        ),
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let s = common::random_state(2, 16, 3, 0.5, 100 + seed);
        let (n1, n2) = nonlinear_rhs(&s).map_err(err)?;
        let (d1, d2) = common::direct_nonlinear(&s.v, &s.b);
        for (got, want) in [(&n1, &d1), (&n2, &d2)] {
            let scale = want.components().iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
            let diff = got
                .components()
                .iter()
                .flatten()
                .zip(want.components().iter().flatten())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            worst = worst.max(diff / scale);
        }
    }
    Ok((worst < 1e-11, format!("20 states at N = 16, max rel err {worst:.2e}")))
}

fn convergence_order() -> Outcome {
    let grid = SpectralGrid::new(2, 16).map_err(err)?;
    let bf = estimate_constant(&preset_vector("sqrt2").unwrap(), 1.01, 32).map_err(err)?;
    let (v, b) = make_initial_data(&grid, &bf, 4, EPS, 5.0, 3).map_err(err)?;
    let initial = SimulationState::new(v, b, bf).map_err(err)?;
    let solve = |dt: f64| -> Result<SimulationState, String> {
        let cfg = IntegratorConfig {
            dt: Some(dt),
            t_end: 1.0,
            ..IntegratorConfig::default()
        };
        let rec = run(initial.clone(), &cfg, &[], |_, _| Ok(())).map_err(err)?;
        Ok(rec.state)
    };
    let reference = solve(0.003125)?;
    let mut errors = Vec::new();
    for dt in [0.1, 0.05, 0.025] {
        let s = solve(dt)?;
        errors.push(s.v.max_rel_diff(&reference.v).max(s.b.max_rel_diff(&reference.b)));
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let errors: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    Ok((
        min >= 3.7,
        format!("errors [{}], observed orders {orders:.3?}", errors.join(", ")),
    ))
}

fn report(failures: &mut usize, number: usize, name: &str, outcome: Outcome) {
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if !pass {
        *failures += 1;
    }
    println!("{} [{number:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn main() {
    let mut failures = 0;
    report(&mut failures, 1, "propagator exactness", propagator_exactness());
    report(&mut failures, 2, "kernel bounds", kernel_bounds());
    report(&mut failures, 3, "linear energy identity", linear_energy_identity());

    let linear_dir = tempfile::tempdir().expect("temp dir");
    report(&mut failures, 4, "linear decay rates", linear_rates(linear_dir.path()));

    let nonlinear_dir = tempfile::tempdir().expect("temp dir");
    match nonlinear_run(nonlinear_dir.path()) {
        Ok(run) => {
            report(&mut failures, 5, "nonlinear stability", nonlinear_stability(&run));
            report(&mut failures, 6, "nonlinear decay", nonlinear_decay(&run));
            report(&mut failures, 7, "structural invariants", structural_invariants(&run));
        }
        Err(e) => {
            for (number, name) in [
                (5, "nonlinear stability"),
                (6, "nonlinear decay"),
                (7, "structural invariants"),
            ] {
                report(&mut failures, number, name, Err(e.clone()));
            }
        }
    }

    report(
        &mut failures,
        8,
        "diophantine constant and Poincare bound",
        diophantine_poincare(),
    );
    report(
        &mut failures,
        9,
        "nonlinearity oracle equivalence",
        oracle_equivalence(),
    );
    report(
        &mut failures,
        10,
        "time-stepping convergence order",
        convergence_order(),
    );

    println!("acceptance: {} passed, {failures} failed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
