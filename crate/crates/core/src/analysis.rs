//! Poincaré sections, largest Lyapunov exponent, Monte Carlo ensembles and
//! moment-error diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::VectorField;
use crate::integrate::{integrate, Dopri5, IntegrateError, IntegratorConfig, Output, Tangent, Trajectory};
use crate::models::{Distribution, ModelSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid analysis parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("Monte Carlo sample {index} failed: {source}")]
    Sample { index: usize, source: IntegrateError },
    #[error("time grids differ: {0}")]
    GridMismatch(String),
}

/// Integrates and records exactly at `times`, which must start at or after
/// `config.t0` and increase. Shared by sections and ensembles.
pub fn sample_at<F: VectorField>(
    field: &F,
    config: &IntegratorConfig,
    x0: &[f64],
    times: &[f64],
) -> Result<Trajectory, IntegrateError> {
    let Some(&last) = times.last() else {
        return Ok(Trajectory::default());
    };
    if last == config.t0 {
        // nothing to integrate; every requested time is the start
        if x0.len() != field.dim() {
            return Err(IntegrateError::DimensionMismatch { expected: field.dim(), got: x0.len() });
        }
        let mut traj = Trajectory::default();
        for &t in times {
            if t != config.t0 {
                return Err(IntegrateError::InvalidConfig("output times must be strictly monotone".into()));
            }
            traj.times.push(t);
            traj.states.push(x0.to_vec());
        }
        return Ok(traj);
    }
    let cfg = IntegratorConfig { t1: last, ..config.clone() };
    integrate(field, &cfg, x0, &Output::Times(times.to_vec()))
}

/// Stroboscopic snapshots at `t_n = (2 pi n + phase) / omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSection {
    pub phase: f64,
    pub omega: f64,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

pub fn section_times(omega: f64, phase: f64, n_points: usize) -> Vec<f64> {
    (0..n_points)
        .map(|n| (2.0 * std::f64::consts::PI * n as f64 + phase) / omega)
        .collect()
}

/// Integrates from `config.t0` and samples exactly at the section times.
pub fn poincare<F: VectorField>(
    field: &F,
    config: &IntegratorConfig,
    x0: &[f64],
    omega: f64,
    phase: f64,
    n_points: usize,
) -> Result<PoincareSection, AnalysisError> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(AnalysisError::InvalidParameter(format!("forcing frequency must be positive, got {omega}")));
    }
    let times = section_times(omega, phase, n_points);
    if times.first().is_some_and(|&t| t < config.t0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "first section time {} precedes the start time {}",
            times[0], config.t0
        )));
    }
    let traj = sample_at(field, config, x0, &times)?;
    Ok(PoincareSection { phase, omega, times: traj.times, points: traj.states })
}

/// Parameters of the Benettin estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovOptions {
    pub horizon: f64,
    pub renorm_dt: f64,
    /// Discarded initial time; 5% of the horizon when absent.
    pub transient: Option<f64>,
    /// Initial tangent vector; the first basis vector when absent.
    pub initial_tangent: Option<Vec<f64>>,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self { horizon: 2e4, renorm_dt: 1.0, transient: None, initial_tangent: None }
    }
}

impl LyapunovOptions {
    pub fn transient(&self) -> f64 {
        self.transient.unwrap_or(0.05 * self.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub exponent: f64,
    pub horizon: f64,
    pub renorm_dt: f64,
    pub transient: f64,
    /// `(elapsed time, running estimate)` after each renormalization past
    /// the transient.
    pub series: Vec<(f64, f64)>,
    pub n_rhs_evaluations: u64,
}

/// Largest Lyapunov exponent by renormalizing a tangent vector carried with
/// the analytic Jacobian.
pub fn largest_lyapunov<F: VectorField>(
    field: &F,
    config: &IntegratorConfig,
    x0: &[f64],
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate, AnalysisError> {
    let n = field.dim();
    let transient = opts.transient();
    if !(opts.renorm_dt > 0.0) || !(opts.horizon > 0.0) || !(transient >= 0.0 && transient + opts.renorm_dt <= opts.horizon) {
        return Err(AnalysisError::InvalidParameter(format!(
            "need transient >= 0, renorm_dt > 0 and transient + renorm_dt <= horizon (horizon {}, transient {transient}, renorm_dt {})",
            opts.horizon, opts.renorm_dt
        )));
    }
    let mut v = opts.initial_tangent.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; n];
        if n > 0 {
            e[0] = 1.0;
        }
        e
    });
    if v.len() != n {
        return Err(AnalysisError::InvalidParameter(format!("initial tangent has length {}, expected {n}", v.len())));
    }
    let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm0 > 0.0) {
        return Err(AnalysisError::InvalidParameter("initial tangent must be nonzero".into()));
    }
    v.iter_mut().for_each(|a| *a /= norm0);

    let mut y0 = x0.to_vec();
    y0.extend(&v);
    let tangent = Tangent::new(field, 1);
    let mut stepper = Dopri5::new(&tangent, config.t0, &y0, config.dopri_options())?;
    let mut sum_log = 0.0;
    // start of the first renormalization interval that lies past the transient
    let mut accumulating_from = None;
    let mut series = Vec::new();
    let steps = (opts.horizon / opts.renorm_dt).round().max(1.0) as u64;
    let mut previous = 0.0;
    for k in 1..=steps {
        let elapsed = if k == steps { opts.horizon } else { k as f64 * opts.renorm_dt };
        stepper.advance_to(config.t0 + elapsed)?;
        let y = stepper.state_mut();
        let norm = y[n..].iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(AnalysisError::Integrate(IntegrateError::NonFinite { t: config.t0 + elapsed }));
        }
        y[n..].iter_mut().for_each(|a| *a /= norm);
        if previous >= transient {
            let start = *accumulating_from.get_or_insert(previous);
            sum_log += norm.ln();
            series.push((elapsed, sum_log / (elapsed - start)));
        }
        previous = elapsed;
    }
    Ok(LyapunovEstimate {
        exponent: series.last().map_or(0.0, |&(_, e)| e),
        horizon: opts.horizon,
        renorm_dt: opts.renorm_dt,
        transient,
        series,
        n_rhs_evaluations: stepper.stats().n_rhs_evaluations,
    })
}

/// Pointwise ensemble moments of the base coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// `mean[j][i]`: coordinate `i` at `times[j]`.
    pub mean: Vec<Vec<f64>>,
    /// Population standard deviation, same layout as `mean`.
    pub std: Vec<Vec<f64>>,
    pub n_samples: usize,
    pub seed: u64,
    /// Total right-hand-side evaluations over all samples.
    pub n_rhs_evaluations: u64,
}

/// The standardized variable of sample `index`: its own ChaCha8 stream, so
/// the draw does not depend on scheduling.
pub fn standardized_sample(distribution: Distribution, seed: u64, index: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    match distribution {
        Distribution::Gaussian => StandardNormal.sample(&mut rng),
        Distribution::Uniform => Uniform::new_inclusive(-1.0, 1.0).expect("valid bounds").sample(&mut rng),
    }
}

/// Monte Carlo reference: draws `n` realizations of the model's uncertain
/// quantity, integrates each to `times` and aggregates in sample order.
pub fn monte_carlo(
    model: &ModelSpec,
    n: usize,
    seed: u64,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<EnsembleStats, AnalysisError> {
    ensemble(model.uncertainty.distribution, n, seed, times, config, |lambda| model.realization(lambda))
}

/// Like [`monte_carlo`] for any family of realizations indexed by the
/// standardized variable.
pub fn ensemble<F, R>(
    distribution: Distribution,
    n: usize,
    seed: u64,
    times: &[f64],
    config: &IntegratorConfig,
    realize: R,
) -> Result<EnsembleStats, AnalysisError>
where
    F: VectorField,
    R: Fn(f64) -> (F, Vec<f64>) + Sync,
{
    if n == 0 {
        return Err(AnalysisError::InvalidParameter("need at least one sample".into()));
    }
    let runs: Vec<Result<Trajectory, AnalysisError>> = (0..n)
        .into_par_iter()
        .map(|index| {
            let (field, x0) = realize(standardized_sample(distribution, seed, index));
            sample_at(&field, config, &x0, times).map_err(|source| AnalysisError::Sample { index, source })
        })
        .collect();
    let dim = match runs.iter().find_map(|r| r.as_ref().ok()) {
        Some(t) => t.states.first().map_or(0, Vec::len),
        None => 0,
    };
    let mut sum = vec![vec![0.0; dim]; times.len()];
    let mut n_rhs = 0;
    let mut trajectories = Vec::with_capacity(n);
    for run in runs {
        let traj = run?;
        n_rhs += traj.n_rhs_evaluations;
        for (acc, state) in sum.iter_mut().zip(&traj.states) {
            acc.iter_mut().zip(state).for_each(|(a, x)| *a += x);
        }
        trajectories.push(traj);
    }
    let inv = 1.0 / n as f64;
    let mean: Vec<Vec<f64>> = sum.into_iter().map(|v| v.into_iter().map(|a| a * inv).collect()).collect();
    let mut var = vec![vec![0.0; dim]; times.len()];
    for traj in &trajectories {
        for ((acc, state), m) in var.iter_mut().zip(&traj.states).zip(&mean) {
            for i in 0..dim {
                acc[i] += (state[i] - m[i]).powi(2);
            }
        }
    }
    let std = var.into_iter().map(|v| v.into_iter().map(|a| (a * inv).sqrt()).collect()).collect();
    Ok(EnsembleStats { times: times.to_vec(), mean, std, n_samples: n, seed, n_rhs_evaluations: n_rhs })
}

/// Mean and standard deviation time series of the base coordinates, from
/// either a gPC trajectory or an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
}

impl MomentSeries {
    /// Moments of an expanded trajectory with `base_dim` base coordinates.
    pub fn from_expansion(traj: &Trajectory, base_dim: usize) -> Self {
        let order = traj.states.first().map_or(0, |s| s.len() / base_dim.max(1) - 1);
        let (mean, std) = traj
            .states
            .iter()
            .map(|x| crate::galerkin::moments(x, base_dim, order))
            .unzip();
        Self { times: traj.times.clone(), mean, std }
    }
}

impl From<&EnsembleStats> for MomentSeries {
    fn from(e: &EnsembleStats) -> Self {
        Self { times: e.times.clone(), mean: e.mean.clone(), std: e.std.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentError {
    pub times: Vec<f64>,
    pub mean_error: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    pub threshold: f64,
    /// Coordinates whose mean error is compared with the threshold.
    pub watched: Vec<usize>,
    /// First time the watched mean error exceeds the threshold.
    pub divergence_time: Option<f64>,
}

impl MomentError {
    /// Largest mean error over the watched coordinates at each time.
    pub fn watched_mean_error(&self) -> Vec<f64> {
        self.mean_error
            .iter()
            .map(|row| self.watched.iter().map(|&i| row[i]).fold(0.0, f64::max))
            .collect()
    }
}

/// Absolute deviation of `approx` from `reference` on a shared time grid.
pub fn moment_error(
    approx: &MomentSeries,
    reference: &MomentSeries,
    threshold: f64,
    watched: &[usize],
) -> Result<MomentError, AnalysisError> {
    if approx.times.len() != reference.times.len() {
        return Err(AnalysisError::GridMismatch(format!(
            "{} versus {} sample times",
            approx.times.len(),
            reference.times.len()
        )));
    }
    for (a, b) in approx.times.iter().zip(&reference.times) {
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            return Err(AnalysisError::GridMismatch(format!("time {a} versus {b}")));
        }
    }
    let dim = approx.mean.first().map_or(0, Vec::len);
    if reference.mean.first().map_or(0, Vec::len) != dim {
        return Err(AnalysisError::GridMismatch("coordinate counts differ".into()));
    }
    if let Some(&i) = watched.iter().find(|&&i| i >= dim) {
        return Err(AnalysisError::InvalidParameter(format!("watched coordinate {i} out of range")));
    }
    let diff = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).collect())
            .collect()
    };
    let mut err = MomentError {
        times: approx.times.clone(),
        mean_error: diff(&approx.mean, &reference.mean),
        std_error: diff(&approx.std, &reference.std),
        threshold,
        watched: watched.to_vec(),
        divergence_time: None,
    };
    err.divergence_time = err
        .watched_mean_error()
        .iter()
        .zip(&err.times)
        .find(|(e, _)| **e > threshold)
        .map(|(_, &t)| t);
    Ok(err)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::field::FnField;
    use crate::models::make_model;

    #[test]
    fn autonomous_section_is_plain_sampling() {
        let f = FnField::new(2, |_t, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        });
        let cfg = IntegratorConfig::span(0.0, 1.0).with_tolerances(1e-10, 1e-12);
        let sec = poincare(&f, &cfg, &[1.0, 0.0], 1.0, 0.0, 6).unwrap();
        assert_eq!(sec.times, section_times(1.0, 0.0, 6));
        assert_eq!(sec.points[0], vec![1.0, 0.0]);
        for p in &sec.points {
            assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-7);
        }
        assert!(poincare(&f, &cfg, &[1.0, 0.0], 1.0, 0.0, 0).unwrap().points.is_empty());
        assert!(poincare(&f, &cfg, &[1.0, 0.0], 0.0, 0.0, 3).is_err());
        let shifted = poincare(&f, &cfg, &[1.0, 0.0], 2.0, 1.0, 2).unwrap();
        assert_eq!(shifted.times[0], 0.5);
    }

    #[test]
    fn lyapunov_of_linear_growth() {
        let f = FnField::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = 0.3 * x[0]);
        let opts = LyapunovOptions { horizon: 200.0, ..Default::default() };
        let est = largest_lyapunov(&f, &IntegratorConfig::default(), &[1.0], &opts).unwrap();
        assert_abs_diff_eq!(est.exponent, 0.3, epsilon = 1e-3);
        assert_eq!(est.transient, 10.0);
        assert_eq!(est.series.len(), 190);
    }

    #[test]
    fn lyapunov_of_rotation_is_zero() {
        let f = FnField::new(2, |_t, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        });
        let opts = LyapunovOptions { horizon: 1e4, ..Default::default() };
        let est = largest_lyapunov(&f, &IntegratorConfig::default(), &[1.0, 0.0], &opts).unwrap();
        assert!(est.exponent.abs() <= 0.02, "{}", est.exponent);
    }

    #[test]
    fn lyapunov_rejects_bad_options() {
        let f = FnField::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = x[0]);
        let cfg = IntegratorConfig::default();
        for opts in [
            LyapunovOptions { renorm_dt: 0.0, ..Default::default() },
            LyapunovOptions { horizon: 10.0, transient: Some(10.0), ..Default::default() },
            LyapunovOptions { initial_tangent: Some(vec![0.0]), ..Default::default() },
            LyapunovOptions { initial_tangent: Some(vec![1.0, 0.0]), ..Default::default() },
        ] {
            assert!(largest_lyapunov(&f, &cfg, &[1.0], &opts).is_err());
        }
    }

    #[test]
    fn sample_streams_are_fixed() {
        let a = standardized_sample(Distribution::Gaussian, 5, 17);
        assert_eq!(a, standardized_sample(Distribution::Gaussian, 5, 17));
        assert_ne!(a, standardized_sample(Distribution::Gaussian, 5, 18));
        let u = standardized_sample(Distribution::Uniform, 5, 3);
        assert!((-1.0..=1.0).contains(&u));
    }

    #[test]
    fn single_sample_has_zero_spread() {
        let model = make_model("duffing_uncertain_ic", &BTreeMap::new()).unwrap();
        let times = [0.0, 1.0, 2.0];
        let stats = monte_carlo(&model, 1, 9, &times, &IntegratorConfig::default()).unwrap();
        let lambda = standardized_sample(Distribution::Gaussian, 9, 0);
        let (field, x0) = model.realization(lambda);
        let traj = sample_at(&field, &IntegratorConfig::default(), &x0, &times).unwrap();
        assert_eq!(stats.mean, traj.states);
        assert!(stats.std.iter().flatten().all(|s| *s == 0.0));
    }

    #[test]
    fn initial_distribution_moments() {
        let model = make_model("duffing_uncertain_ic", &BTreeMap::new()).unwrap();
        let n = 100_000;
        let stats = monte_carlo(&model, n, 1, &[0.0], &IntegratorConfig::default()).unwrap();
        assert!((stats.mean[0][0] - 1.0).abs() <= 3.0 * 0.1 / (n as f64).sqrt());
        assert!((stats.std[0][0] / 0.1 - 1.0).abs() <= 0.01);
    }

    #[test]
    fn lognormal_mean() {
        let n = 100_000;
        let cfg = IntegratorConfig::span(0.0, 1.0).with_tolerances(1e-8, 1e-10);
        let stats = ensemble(Distribution::Gaussian, n, 4, &[1.0], &cfg, |xi| {
            let lambda = 1.0 + 0.1 * xi;
            (FnField::new(1, move |_t, x: &[f64], dx: &mut [f64]| dx[0] = -lambda * x[0]), vec![1.0])
        })
        .unwrap();
        let expect = (-1.0f64 + 0.005).exp();
        let tol = 4.0 * stats.std[0][0] / (n as f64).sqrt();
        assert!((stats.mean[0][0] - expect).abs() <= tol, "{} vs {expect}", stats.mean[0][0]);
    }

    #[test]
    fn failing_sample_is_named() {
        let cfg = IntegratorConfig::span(0.0, 2.0);
        let err = ensemble(Distribution::Uniform, 4, 0, &[2.0], &cfg, |xi| {
            let rate = if xi > 0.0 { 1.0 } else { -1.0 };
            (FnField::new(1, move |_t, x: &[f64], dx: &mut [f64]| dx[0] = rate * x[0] * x[0]), vec![1.0])
        })
        .unwrap_err();
        let first_bad = (0..4).find(|&i| standardized_sample(Distribution::Uniform, 0, i) > 0.0).unwrap();
        assert!(matches!(err, AnalysisError::Sample { index, .. } if index == first_bad));
    }

    #[test]
    fn identical_series_do_not_diverge() {
        let s = MomentSeries { times: vec![0.0, 1.0], mean: vec![vec![1.0, 2.0]; 2], std: vec![vec![0.1, 0.2]; 2] };
        let e = moment_error(&s, &s, 0.5, &[0]).unwrap();
        assert!(e.mean_error.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(e.divergence_time, None);
        let mut t = s.clone();
        t.mean[1][0] = 1.6;
        assert_eq!(moment_error(&t, &s, 0.5, &[0]).unwrap().divergence_time, Some(1.0));
        assert_eq!(moment_error(&t, &s, 0.5, &[1]).unwrap().divergence_time, None);
        let short = MomentSeries { times: vec![0.0], mean: vec![vec![1.0, 2.0]], std: vec![vec![0.1, 0.2]] };
        assert!(matches!(moment_error(&short, &s, 0.5, &[0]), Err(AnalysisError::GridMismatch(_))));
    }
}
