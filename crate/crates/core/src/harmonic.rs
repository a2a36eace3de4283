//! Closed-form gPC coefficients of `q'' + (omega0 + alpha lambda)^2 q = 0`,
//! `q(0) = 1`, `q'(0) = 0`, with `lambda ~ U(-1, 1)`, and their contrast with
//! the volume-preserving Galerkin system.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{gauss_rule, BasisKind, QuadratureRule};
use crate::galerkin::ProjectionMode;
use crate::integrate::{integrate_variational, IntegrateError, IntegratorConfig, Output};
use crate::models::{make_model, ModelError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonicError {
    #[error("invalid oscillator setup: {0}")]
    InvalidSetup(String),
    #[error("power {ell} exceeds order {k}")]
    PowerOutOfRange { k: usize, ell: usize },
    #[error("time {t} is outside [0, {t_max}]")]
    TimeOutOfRange { t: f64, t_max: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Frequency `omega0 + alpha lambda` over `lambda in [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSetup {
    pub omega0: f64,
    pub alpha: f64,
    pub order: usize,
}

impl HarmonicSetup {
    /// `alpha = 0` is accepted and gives the deterministic oscillator.
    pub fn new(omega0: f64, alpha: f64, order: usize) -> Result<Self, HarmonicError> {
        if !omega0.is_finite() || !alpha.is_finite() || alpha < 0.0 {
            return Err(HarmonicError::InvalidSetup(format!(
                "need finite omega0 and alpha >= 0, got {omega0} and {alpha}"
            )));
        }
        Ok(Self { omega0, alpha, order })
    }

    pub fn omega1(&self) -> f64 {
        self.omega0 - self.alpha
    }

    pub fn omega2(&self) -> f64 {
        self.omega0 + self.alpha
    }

    /// `E[q(t)^2]` of the exact solution.
    pub fn mean_square(&self, t: f64) -> f64 {
        let a = 2.0 * self.alpha * t;
        let sinc = if a == 0.0 { 1.0 } else { a.sin() / a };
        0.5 * (1.0 + sinc * (2.0 * self.omega0 * t).cos())
    }
}

/// Generalized binomial coefficient `x (x-1) ... (x-k+1) / k!`.
fn binomial(x: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (x - j as f64) / (j + 1) as f64)
}

/// Monomial coefficient of `lambda^ell` in the orthonormal Legendre
/// polynomial of order `k`.
pub fn legendre_b(k: usize, ell: usize) -> Result<f64, HarmonicError> {
    if ell > k {
        return Err(HarmonicError::PowerOutOfRange { k, ell });
    }
    let half = (k + ell) as f64 / 2.0 - 0.5;
    Ok(((2 * k + 1) as f64).sqrt() * 2f64.powi(k as i32) * binomial(k as f64, ell) * binomial(half, k))
}

/// Below this `alpha t` (scaled by the highest power) the upward recurrence
/// loses too many digits and quadrature is used instead.
fn recurrence_is_stable(a: f64, max_ell: usize) -> bool {
    a >= 1.0f64.max(max_ell as f64 / 2.0)
}

fn quadrature_nodes(alpha: f64, t: f64) -> usize {
    64 + (alpha * t).ceil() as usize
}

/// `I_ell(t) = int_{-1}^{1} lambda^ell cos((omega0 + alpha lambda) t) dlambda`
/// for `ell = 0..=max_ell`.
pub fn i_ell_all(max_ell: usize, t: f64, setup: &HarmonicSetup) -> Vec<f64> {
    let a = setup.alpha * t;
    if !recurrence_is_stable(a, max_ell) {
        let rule = gauss_rule(BasisKind::LegendreUniform, quadrature_nodes(setup.alpha, t)).expect("nodes > 0");
        return i_ell_quadrature(max_ell, t, setup, &rule);
    }
    let (w1, w2) = (setup.omega1() * t, setup.omega2() * t);
    let (s1, s2, c1, c2) = (w1.sin(), w2.sin(), w1.cos(), w2.cos());
    let mut out: Vec<f64> = Vec::with_capacity(max_ell + 1);
    for ell in 0..=max_ell {
        let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
        let l = ell as f64;
        let mut v = (s2 - sign * s1) / a + l / (a * a) * (c2 + sign * c1);
        if ell >= 2 {
            v -= l * (l - 1.0) / (a * a) * out[ell - 2];
        }
        out.push(v);
    }
    out
}

fn i_ell_quadrature(max_ell: usize, t: f64, setup: &HarmonicSetup, rule: &QuadratureRule) -> Vec<f64> {
    (0..=max_ell)
        .map(|ell| 2.0 * rule.integrate(|x| x.powi(ell as i32) * ((setup.omega0 + setup.alpha * x) * t).cos()))
        .collect()
}

pub fn i_ell(ell: usize, t: f64, setup: &HarmonicSetup) -> f64 {
    i_ell_all(ell, t, setup)[ell]
}

/// Exact projection coefficients at one time, in the expanded layout
/// `(Q0, P0, Q1, P1, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactCoefficients {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl ExactCoefficients {
    pub fn interleaved(&self) -> Vec<f64> {
        self.q.iter().zip(&self.p).flat_map(|(a, b)| [*a, *b]).collect()
    }

    pub fn norm(&self) -> f64 {
        self.q.iter().chain(&self.p).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Evaluates exact coefficients for any `t` in `[0, t_max]` with one
/// Gauss-Legendre rule fine enough for the whole range.
#[derive(Debug, Clone)]
pub struct CoefficientOracle {
    setup: HarmonicSetup,
    t_max: f64,
    rule: QuadratureRule,
    /// `psi[j][k]` at the rule's nodes.
    psi: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl CoefficientOracle {
    pub fn new(setup: HarmonicSetup, t_max: f64) -> Result<Self, HarmonicError> {
        if !(t_max >= 0.0) || !t_max.is_finite() {
            return Err(HarmonicError::InvalidSetup(format!("horizon must be finite and >= 0, got {t_max}")));
        }
        let rule = gauss_rule(BasisKind::LegendreUniform, quadrature_nodes(setup.alpha, t_max)).expect("nodes > 0");
        let psi = rule
            .nodes
            .iter()
            .map(|&x| {
                let mut v = vec![0.0; setup.order + 1];
                BasisKind::LegendreUniform.eval_all(x, &mut v);
                v
            })
            .collect();
        let b = (0..=setup.order)
            .map(|k| (0..=k).map(|l| legendre_b(k, l).expect("l <= k")).collect())
            .collect();
        Ok(Self { setup, t_max, rule, psi, b })
    }

    pub fn setup(&self) -> &HarmonicSetup {
        &self.setup
    }

    fn check(&self, t: f64) -> Result<(), HarmonicError> {
        if !(0.0..=self.t_max).contains(&t) {
            return Err(HarmonicError::TimeOutOfRange { t, t_max: self.t_max });
        }
        Ok(())
    }

    fn project<G: Fn(f64) -> f64>(&self, g: G) -> Vec<f64> {
        let mut out = vec![0.0; self.setup.order + 1];
        for ((&x, &w), psi) in self.rule.nodes.iter().zip(&self.rule.weights).zip(&self.psi) {
            let gw = w * g(x);
            out.iter_mut().zip(psi).for_each(|(o, p)| *o += gw * p);
        }
        out
    }

    /// `Q_k = (1/2) sum_l B_kl I_l`, with `I_l` from the recurrence where it
    /// is stable; `P_k` is the projection of `q' = -w sin(w t)` by quadrature.
    pub fn coefficients(&self, t: f64) -> Result<ExactCoefficients, HarmonicError> {
        self.check(t)?;
        let r = self.setup.order;
        let i = if recurrence_is_stable(self.setup.alpha * t, r) {
            i_ell_all(r, t, &self.setup)
        } else {
            i_ell_quadrature(r, t, &self.setup, &self.rule)
        };
        let q = self.b.iter().map(|row| 0.5 * row.iter().zip(&i).map(|(b, v)| b * v).sum::<f64>()).collect();
        let s = self.setup;
        let p = self.project(|x| {
            let w = s.omega0 + s.alpha * x;
            -w * (w * t).sin()
        });
        Ok(ExactCoefficients { t, q, p })
    }

    /// `Q_k` by direct quadrature of `cos(w t) psi_k`.
    pub fn quadrature_q(&self, t: f64) -> Result<Vec<f64>, HarmonicError> {
        self.check(t)?;
        let s = self.setup;
        Ok(self.project(|x| ((s.omega0 + s.alpha * x) * t).cos()))
    }
}

/// One-off evaluation; prefer [`CoefficientOracle`] for many times.
pub fn exact_coefficients(setup: &HarmonicSetup, t: f64) -> Result<ExactCoefficients, HarmonicError> {
    CoefficientOracle::new(*setup, t.max(0.0))?.coefficients(t)
}

/// Side-by-side record of the Galerkin flow and the exact coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleReport {
    pub setup: HarmonicSetup,
    pub times: Vec<f64>,
    /// Determinant of the Galerkin flow's fundamental matrix.
    pub det: Vec<f64>,
    pub exact: Vec<Vec<f64>>,
    pub pc: Vec<Vec<f64>>,
    pub exact_norm: Vec<f64>,
    pub pc_norm: Vec<f64>,
    pub mismatch: Vec<f64>,
    /// First time the mismatch exceeds half the Galerkin norm.
    pub t_star: Option<f64>,
}

impl LiouvilleReport {
    pub fn max_det_deviation(&self) -> f64 {
        self.det.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Integrates the full Galerkin system with its fundamental matrix and
/// compares it with the exact coefficients at `times`.
pub fn liouville_contrast(
    setup: &HarmonicSetup,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<LiouvilleReport, HarmonicError> {
    let horizon = times.iter().copied().fold(0.0, f64::max);
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarmonicError::InvalidSetup("times must be nonnegative and increasing".into()));
    }
    let params = BTreeMap::from([("omega0".to_string(), setup.omega0), ("alpha".to_string(), setup.alpha)]);
    let model = make_model("harmonic_uncertain_freq", &params)?;
    let sys = model.project(setup.order, ProjectionMode::Full);
    let n = sys.expanded_dim();
    let x0 = model.expanded_initial_condition(setup.order);
    let oracle = CoefficientOracle::new(*setup, horizon)?;

    let (pc, det) = if horizon > 0.0 {
        let cfg = IntegratorConfig { t0: 0.0, t1: horizon, ..config.clone() };
        let sol = integrate_variational(&sys, &cfg, &x0, &DMatrix::identity(n, n), &Output::Times(times.to_vec()))?;
        let det = sol.fundamental.iter().map(|m| m.clone().determinant()).collect();
        (sol.trajectory.states, det)
    } else {
        (vec![x0.clone(); times.len()], vec![1.0; times.len()])
    };
    let mut report = LiouvilleReport {
        setup: *setup,
        times: times.to_vec(),
        det,
        exact: Vec::with_capacity(times.len()),
        pc_norm: pc.iter().map(|x| norm(x)).collect(),
        pc,
        exact_norm: Vec::with_capacity(times.len()),
        mismatch: Vec::with_capacity(times.len()),
        t_star: None,
    };
    for (j, &t) in times.iter().enumerate() {
        let exact = oracle.coefficients(t)?.interleaved();
        let diff: Vec<f64> = exact.iter().zip(&report.pc[j]).map(|(a, b)| a - b).collect();
        report.mismatch.push(norm(&diff));
        report.exact_norm.push(norm(&exact));
        report.exact.push(exact);
        if report.t_star.is_none() && report.mismatch[j] > 0.5 * report.pc_norm[j] {
            report.t_star = Some(t);
        }
    }
    Ok(report)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn setup(order: usize) -> HarmonicSetup {
        HarmonicSetup::new(1.0, 0.25, order).unwrap()
    }

    #[test]
    fn low_order_coefficients() {
        assert_eq!(legendre_b(0, 0).unwrap(), 1.0);
        assert_abs_diff_eq!(legendre_b(1, 1).unwrap(), 3f64.sqrt(), epsilon = 1e-15);
        assert_eq!(legendre_b(1, 0).unwrap(), 0.0);
        assert_abs_diff_eq!(legendre_b(2, 0).unwrap(), -0.5 * 5f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(legendre_b(2, 3), Err(HarmonicError::PowerOutOfRange { .. })));
    }

    #[test]
    fn monomial_form_matches_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut psi = vec![0.0; 9];
        for _ in 0..50 {
            let x: f64 = rng.random_range(-1.0..1.0);
            BasisKind::LegendreUniform.eval_all(x, &mut psi);
            for (k, expect) in psi.iter().enumerate() {
                let sum: f64 = (0..=k).map(|l| legendre_b(k, l).unwrap() * x.powi(l as i32)).sum();
                assert_abs_diff_eq!(sum, *expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn i_ell_closed_forms_and_limits() {
        let s = setup(0);
        for t in [3.0, 10.0, 77.0] {
            let expect = ((s.omega2() * t).sin() - (s.omega1() * t).sin()) / (s.alpha * t);
            assert_abs_diff_eq!(i_ell(0, t, &s), expect, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(i_ell(0, 1e-9, &s), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(i_ell(1, 1e-9, &s), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(i_ell(2, 0.0, &s), 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn i_ell_matches_quadrature() {
        let s = setup(0);
        let rule = gauss_rule(BasisKind::LegendreUniform, 64).unwrap();
        for t in [1.0, 10.0, 100.0] {
            let fine = gauss_rule(BasisKind::LegendreUniform, quadrature_nodes(s.alpha, t)).unwrap();
            let reference = i_ell_quadrature(10, t, &s, if t < 100.0 { &rule } else { &fine });
            let got = i_ell_all(10, t, &s);
            for l in 0..=10 {
                assert_abs_diff_eq!(got[l], reference[l], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn initial_coefficients() {
        let c = exact_coefficients(&setup(8), 0.0).unwrap();
        assert_abs_diff_eq!(c.q[0], 1.0, epsilon = 1e-14);
        assert!(c.q[1..].iter().chain(&c.p).all(|v| v.abs() < 1e-14));
        assert_abs_diff_eq!(c.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn mean_coefficient_closed_form() {
        let s = setup(4);
        let oracle = CoefficientOracle::new(s, 200.0).unwrap();
        for t in [0.5, 5.0, 50.0, 200.0] {
            let expect = ((s.omega2() * t).sin() - (s.omega1() * t).sin()) / (2.0 * s.alpha * t);
            assert_abs_diff_eq!(oracle.coefficients(t).unwrap().q[0], expect, epsilon = 1e-12);
        }
        assert!(oracle.coefficients(201.0).is_err());
    }

    #[test]
    fn recurrence_agrees_with_quadrature_projection() {
        let oracle = CoefficientOracle::new(setup(8), 500.0).unwrap();
        for j in 0..=1000 {
            let t = 0.5 * j as f64;
            let a = oracle.coefficients(t).unwrap().q;
            let b = oracle.quadrature_q(t).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-8, "t={t}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn parseval_bound() {
        for order in [2, 8] {
            let s = setup(order);
            let oracle = CoefficientOracle::new(s, 100.0).unwrap();
            for t in [0.0, 1.0, 7.0, 30.0, 100.0] {
                let sum: f64 = oracle.coefficients(t).unwrap().q.iter().map(|v| v * v).sum();
                assert!(sum <= s.mean_square(t) + 1e-8, "order {order} t={t}");
            }
        }
    }

    #[test]
    fn deterministic_oscillator_is_matched() {
        let s = HarmonicSetup::new(1.0, 0.0, 2).unwrap();
        let times: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let cfg = IntegratorConfig::default().with_tolerances(1e-10, 1e-12);
        let rep = liouville_contrast(&s, &times, &cfg).unwrap();
        assert!(rep.mismatch.iter().all(|m| *m < 1e-7));
        assert!(rep.t_star.is_none());
        for (t, x) in times.iter().zip(&rep.pc) {
            assert_abs_diff_eq!(x[0], t.cos(), epsilon = 1e-7);
        }
        assert!(HarmonicSetup::new(1.0, -0.1, 2).is_err());
    }
}
