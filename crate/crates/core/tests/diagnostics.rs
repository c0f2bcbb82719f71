mod common;

use proptest::prelude::*;

use torus_mhd::diagnostics::{
    default_modified_energy_weight, emit_csv, fit_decay, fit_decay_series, geometric_times, modified_energy,
    modified_energy_envelope, observe, read_csv, FieldKind, NormKey, ObservationRow,
};
use torus_mhd::diophantine::estimate_constant;
use torus_mhd::solver::{make_initial_data, SimulationState};
use torus_mhd::spectral::{sobolev_norm_sq, SobolevIndex, SpectralGrid, SpectralVectorField};

fn rows_from(times: &[f64], f: impl Fn(f64) -> f64) -> Vec<ObservationRow> {
    let key = NormKey::new(FieldKind::B, SobolevIndex::homogeneous(0.0));
    times
        .iter()
        .map(|&t| ObservationRow {
            t,
            norms: vec![(key, f(t))],
            q_s: vec![],
            cumulative_damping: t,
            extras: vec![],
            div_residual: 0.0,
            mean_residual: 0.0,
            hermitian_residual: 0.0,
        })
        .collect()
}

#[test]
fn fit_on_rows_uses_the_named_column() {
    let times = geometric_times(0.5, 1.1, 200.0).unwrap();
    let rows = rows_from(&times, |t| 3.0 * (1.0 + t).powf(-1.5));
    let fit = fit_decay(&rows, "b_Hdot0", (50.0, 200.0), 1.5).unwrap();
    assert!((fit.fitted_exponent + 1.5).abs() < 1e-9);
    assert!((fit.fitted_c - 3.0).abs() < 1e-9);
    assert!(fit.bound_satisfied);
    assert!(fit_decay(&rows, "v_Hdot0", (50.0, 200.0), 1.5).is_err());
    assert!(fit_decay(&rows, "b_Hdot0", (150.0, 200.0), 1.5).is_err());
}

#[test]
fn growing_bound_curve_is_flagged() {
    let times: Vec<f64> = (0..50).map(|k| 10.0 + 2.0 * k as f64).collect();
    let values: Vec<f64> = times.iter().map(|t| (1.0 + t).powf(-1.0)).collect();
    let fit = fit_decay_series("x", &times, &values, (10.0, 108.0), 2.0).unwrap();
    assert!((fit.curve_slope - 1.0).abs() < 1e-9);
    assert!(!fit.bound_satisfied);
}

#[test]
fn csv_file_round_trip_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let rows = rows_from(&[0.0, 0.1, 1.0 / 3.0, 7.25], |t| (-t).exp() * std::f64::consts::E);
    emit_csv(&rows, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), rows);
    emit_csv(&[], &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
    assert!(emit_csv(&rows, &dir.path().join("missing/rows.csv")).is_err());
    assert!(read_csv(&dir.path().join("nope.csv")).is_err());
}

fn state_with_background(scale: f64, seed: u64) -> SimulationState {
    let grid = SpectralGrid::new(2, 16).unwrap();
    let b = [scale, scale * 2f64.sqrt()];
    let bf = estimate_constant(&b, 1.01, 8).unwrap();
    let (v, h) = make_initial_data(&grid, &bf, 3, 1.0, 2.0, seed).unwrap();
    SimulationState::new(v, h, bf).unwrap()
}

#[test]
fn zero_velocity_leaves_only_the_weighted_norm() {
    let s = state_with_background(1.0, 4);
    let zero = SimulationState::new(SpectralVectorField::zeros(s.grid()), s.b.clone(), s.bf.clone()).unwrap();
    let a = default_modified_energy_weight(&s.bf);
    for level in 0..=3 {
        let q = modified_energy(&zero, level, a);
        let expect = a * sobolev_norm_sq(&s.b, SobolevIndex::inhomogeneous(level as f64));
        assert!(common::rel_err(q, expect) < 1e-14);
    }
}

#[test]
fn observation_rows_have_nonnegative_residuals() {
    let s = state_with_background(1.0, 2);
    let keys = [
        NormKey::new(FieldKind::Pair, SobolevIndex::inhomogeneous(2.0)),
        NormKey::new(FieldKind::V, SobolevIndex::homogeneous(0.5)),
    ];
    let a = default_modified_energy_weight(&s.bf);
    let row = observe(&s.v, &s.b, &s.bf, 0.0, &keys, &[0, 1, 2], a);
    assert!(row.div_residual >= 0.0 && row.mean_residual >= 0.0 && row.hermitian_residual >= 0.0);
    assert_eq!(row.q_s.len(), 3);
    let pair = row.get("vb_H2").unwrap();
    let expect = (sobolev_norm_sq(&s.v, SobolevIndex::inhomogeneous(2.0))
        + sobolev_norm_sq(&s.b, SobolevIndex::inhomogeneous(2.0)))
    .sqrt();
    assert!(common::rel_err(pair, expect) < 1e-14);
    assert!(row.get("Q_1").is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fit_is_invariant_under_rescaling(alpha in 1e-6f64..1e6, p in 0.2f64..4.0, noise in 0u64..1000) {
        let times = geometric_times(1.0, 1.15, 300.0).unwrap();
        let wiggle = |t: f64| 1.0 + 0.1 * ((t * 0.37 + noise as f64).sin());
        let base: Vec<f64> = times.iter().map(|&t| wiggle(t) * (1.0 + t).powf(-p)).collect();
        let scaled: Vec<f64> = base.iter().map(|x| alpha * x).collect();
        let a = fit_decay_series("x", &times, &base, (75.0, 300.0), p).unwrap();
        let b = fit_decay_series("x", &times, &scaled, (75.0, 300.0), p).unwrap();
        prop_assert!((a.fitted_exponent - b.fitted_exponent).abs() < 1e-9);
        prop_assert!(common::rel_err(b.fitted_c, alpha * a.fitted_c) < 1e-12);
    }

    #[test]
    fn modified_energy_envelope_holds(scale in 0.05f64..5.0, seed in 0u64..10_000, level in 0u32..5) {
        let s = state_with_background(scale, seed);
        let a = default_modified_energy_weight(&s.bf);
        let e = modified_energy_envelope(&s.v, &s.b, &s.bf, level, a);
        prop_assert!(e.holds(), "{:?}", e);
    }

    #[test]
    fn modified_energy_is_quadratic(seed in 0u64..10_000, lambda in -3.0f64..3.0) {
        let s = state_with_background(1.0, seed);
        let a = default_modified_energy_weight(&s.bf);
        let mut t = s.clone();
        t.v.scale(lambda);
        t.b.scale(lambda);
        let q = modified_energy(&s, 2, a);
        prop_assert!(common::rel_err(modified_energy(&t, 2, a), lambda * lambda * q) < 1e-12);
    }
}
