use std::collections::BTreeMap;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use polychaos::field::{FnField, VectorField};
use polychaos::galerkin::ProjectionMode;
use polychaos::integrate::{
    integrate, integrate_symplectic, integrate_variational, CanonicalSplit, IntegrateError, IntegratorConfig, Method,
    Output,
};
use polychaos::models::make_model;

fn oscillator() -> FnField<impl Fn(f64, &[f64], &mut [f64])> {
    FnField::new(2, |_t, x: &[f64], dx: &mut [f64]| {
        dx[0] = x[1];
        dx[1] = -x[0];
    })
}

#[test]
fn rk45_harmonic_period() {
    let cfg = IntegratorConfig::span(0.0, 2.0 * std::f64::consts::PI);
    let traj = integrate(&oscillator(), &cfg, &[1.0, 0.0], &Output::EveryStep).unwrap();
    let end = traj.last_state().unwrap();
    assert_abs_diff_eq!(end[0], 1.0, epsilon = 1e-5);
    assert_abs_diff_eq!(end[1], 0.0, epsilon = 1e-5);
    assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    assert!(traj.n_rhs_evaluations >= 6 * traj.n_steps);
}

#[test]
fn rk45_exponential_growth() {
    let f = FnField::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = x[0]);
    let cfg = IntegratorConfig::span(0.0, 1.0).with_tolerances(1e-9, 1e-12);
    let traj = integrate(&f, &cfg, &[1.0], &Output::Times(vec![1.0])).unwrap();
    assert_abs_diff_eq!(traj.states[0][0], std::f64::consts::E, epsilon = 1e-8);
}

#[test]
fn backward_integration_returns() {
    let fwd = integrate(&oscillator(), &IntegratorConfig::span(0.0, 3.0).with_tolerances(1e-10, 1e-12), &[1.0, 0.5], &Output::EveryStep).unwrap();
    let mid = fwd.last_state().unwrap().to_vec();
    let back = integrate(&oscillator(), &IntegratorConfig::span(3.0, 0.0).with_tolerances(1e-10, 1e-12), &mid, &Output::EveryStep).unwrap();
    let end = back.last_state().unwrap();
    assert_abs_diff_eq!(end[0], 1.0, epsilon = 1e-8);
    assert_abs_diff_eq!(end[1], 0.5, epsilon = 1e-8);
}

#[test]
fn output_times_are_hit_exactly() {
    let times: Vec<f64> = (0..=10).map(|n| 2.0 * std::f64::consts::PI * n as f64).collect();
    let cfg = IntegratorConfig::span(0.0, *times.last().unwrap());
    let traj = integrate(&oscillator(), &cfg, &[1.0, 0.0], &Output::Times(times.clone())).unwrap();
    assert_eq!(traj.times, times);
    for s in &traj.states {
        assert_abs_diff_eq!(s[0], 1.0, epsilon = 1e-4);
    }
}

#[test]
fn rk4_fixed_step_is_fourth_order() {
    let err = |h: f64| {
        let cfg = IntegratorConfig { method: Method::Rk4Fixed, h, ..IntegratorConfig::span(0.0, 1.0) };
        let traj = integrate(&oscillator(), &cfg, &[1.0, 0.0], &Output::EveryStep).unwrap();
        (traj.last_state().unwrap()[0] - 1f64.cos()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn invalid_configs_are_rejected() {
    let f = oscillator();
    let bad_tol = IntegratorConfig { rtol: 0.0, ..IntegratorConfig::span(0.0, 1.0) };
    assert!(matches!(integrate(&f, &bad_tol, &[1.0, 0.0], &Output::EveryStep), Err(IntegrateError::InvalidConfig(_))));
    let degenerate = IntegratorConfig::span(1.0, 1.0);
    assert!(integrate(&f, &degenerate, &[1.0, 0.0], &Output::EveryStep).is_err());
    let sv = IntegratorConfig { method: Method::StormerVerlet, ..IntegratorConfig::span(0.0, 1.0) };
    assert_eq!(integrate(&f, &sv, &[1.0, 0.0], &Output::EveryStep), Err(IntegrateError::NeedsCanonicalSplit));
    let outside = IntegratorConfig::span(0.0, 1.0);
    assert!(integrate(&f, &outside, &[1.0, 0.0], &Output::Times(vec![2.0])).is_err());
    assert!(matches!(
        integrate(&f, &outside, &[1.0], &Output::EveryStep),
        Err(IntegrateError::DimensionMismatch { expected: 2, got: 1 })
    ));
}

#[test]
fn blow_up_reports_time() {
    let f = FnField::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0]);
    let err = integrate(&f, &IntegratorConfig::span(0.0, 2.0), &[1.0], &Output::EveryStep).unwrap_err();
    match err {
        IntegrateError::StepSizeUnderflow { t, .. } | IntegrateError::NonFinite { t } | IntegrateError::MaxSteps { t, .. } => {
            assert!((t - 1.0).abs() < 1e-3, "failed at {t}")
        }
        other => panic!("unexpected {other:?}"),
    }
}

fn unforced_pc(order: usize) -> (polychaos::galerkin::GalerkinSystem, CanonicalSplit, Vec<f64>) {
    let model = make_model("duffing_unforced", &BTreeMap::new()).unwrap();
    let sys = model.project(order, ProjectionMode::Full);
    let split = CanonicalSplit::new(sys.symbolic(), &model.expanded_pairs(order).unwrap()).unwrap();
    let x0 = model.expanded_initial_condition(order);
    (sys, split, x0)
}

#[test]
fn leapfrog_time_reversal() {
    let (sys, split, x0) = unforced_pc(2);
    let fwd = integrate_symplectic(&sys, &split, 0.01, (0.0, 10.0), &x0, 1000).unwrap();
    let mid = fwd.last_state().unwrap().to_vec();
    let back = integrate_symplectic(&sys, &split, 0.01, (10.0, 0.0), &mid, 1000).unwrap();
    let end = back.last_state().unwrap();
    let err = end.iter().zip(&x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-10 * 10.0, "reversal error {err}");
    assert_eq!(fwd.n_rhs_evaluations, 1 + 2 * 1000);
}

#[test]
fn leapfrog_keeps_zero_at_rest() {
    let (sys, split, x0) = unforced_pc(1);
    let zero = vec![0.0; x0.len()];
    let traj = integrate_symplectic(&sys, &split, 0.01, (0.0, 50.0), &zero, 100).unwrap();
    assert!(traj.states.iter().all(|s| s.iter().all(|v| *v == 0.0)));
}

#[test]
fn leapfrog_energy_bounded_for_oscillator() {
    let sys = polychaos::field::PolySystem::new(
        2,
        vec![
            polychaos::field::PolyTerm {
                target: 0,
                coeff: 1.0,
                monomial: polychaos::field::Monomial::from_pairs([(1, 1)]),
                forcing: Default::default(),
            },
            polychaos::field::PolyTerm {
                target: 1,
                coeff: -1.0,
                monomial: polychaos::field::Monomial::from_pairs([(0, 1)]),
                forcing: Default::default(),
            },
        ],
    );
    let split = CanonicalSplit::new(&sys, &[(0, 1)]).unwrap();
    let traj = integrate_symplectic(&sys, &split, 0.01, (0.0, 1e4), &[1.0, 0.0], 97).unwrap();
    let energy = |s: &Vec<f64>| 0.5 * (s[0] * s[0] + s[1] * s[1]);
    let drift = traj.states.iter().map(|s| (energy(s) - 0.5).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-4, "energy error {drift}");
}

#[test]
fn split_rejects_forced_and_damped_systems() {
    let model = make_model("duffing_forced", &BTreeMap::new()).unwrap();
    let sys = model.project(1, ProjectionMode::Full);
    assert!(matches!(
        CanonicalSplit::new(sys.symbolic(), &[(0, 1), (2, 3)]),
        Err(IntegrateError::NotSeparable(_))
    ));
    let (sys, _, _) = unforced_pc(1);
    assert!(CanonicalSplit::new(sys.symbolic(), &[(0, 2), (1, 3)]).is_err());
    assert!(CanonicalSplit::new(sys.symbolic(), &[(0, 1)]).is_err());
}

#[test]
fn tangent_flow_of_linear_growth() {
    let f = FnField::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = 0.7 * x[0]);
    let cfg = IntegratorConfig::span(0.0, 2.0).with_tolerances(1e-10, 1e-12);
    let sol = integrate_variational(&f, &cfg, &[1.0], &DMatrix::identity(1, 1), &Output::Times(vec![1.0, 2.0])).unwrap();
    assert_abs_diff_eq!(sol.fundamental[1][(0, 0)], (1.4f64).exp(), epsilon = 1e-8);
    assert_eq!(sol.trajectory.states[1].len(), 1);
}

#[test]
fn hamiltonian_pc_flow_preserves_volume() {
    let (sys, _, x0) = unforced_pc(1);
    let n = sys.dim();
    let times: Vec<f64> = (1..=10).map(|i| 10.0 * i as f64).collect();
    let cfg = IntegratorConfig::span(0.0, 100.0).with_tolerances(1e-10, 1e-12);
    let sol = integrate_variational(&sys, &cfg, &x0, &DMatrix::identity(n, n), &Output::Times(times)).unwrap();
    for phi in &sol.fundamental {
        let det = phi.determinant();
        assert!((det - 1.0).abs() <= 1e-4, "det {det}");
    }
}

#[test]
fn damped_pc_volume_contracts_at_constant_rate() {
    let model = make_model("duffing_forced", &BTreeMap::new()).unwrap();
    let sys = model.project(1, ProjectionMode::Full);
    let n = sys.dim();
    let times: Vec<f64> = (1..=20).map(|i| i as f64).collect();
    let cfg = IntegratorConfig::span(0.0, 20.0).with_tolerances(1e-10, 1e-12);
    let sol = integrate_variational(&sys, &cfg, &model.expanded_initial_condition(1), &DMatrix::identity(n, n), &Output::Times(times.clone())).unwrap();
    for (t, phi) in times.iter().zip(&sol.fundamental) {
        let expect = (-0.4 * t).exp();
        let det = phi.determinant();
        assert!((det / expect - 1.0).abs() < 0.01, "t={t} det={det} expected {expect}");
    }
}
