//! Multi-step experiments shared by the commands and the acceptance tests.

use std::collections::BTreeMap;

use polychaos::analysis::{
    monte_carlo, moment_error, sample_at, section_times, EnsembleStats, MomentError, MomentSeries,
};
use polychaos::galerkin::ProjectionMode;
use polychaos::integrate::{Dopri5, IntegratorConfig};
use polychaos::models::{make_model, ModelSpec};
use serde::Serialize;

use crate::CliError;

/// Right-hand-side evaluations of a free adaptive run over `[t0, t1]`,
/// without output constraints on the step sequence.
pub fn free_run_evaluations<F: polychaos::field::VectorField>(
    field: &F,
    config: &IntegratorConfig,
    x0: &[f64],
    t1: f64,
) -> Result<u64, CliError> {
    let mut s = Dopri5::new(field, config.t0, x0, IntegratorConfig { t1, ..config.clone() }.dopri_options())?;
    s.advance_to(t1)?;
    Ok(s.stats().n_rhs_evaluations)
}

/// gPC moments of `model` at `times`.
pub fn pc_moments(
    model: &ModelSpec,
    order: usize,
    mode: ProjectionMode,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<(MomentSeries, u64), CliError> {
    let sys = model.project(order, mode);
    let traj = sample_at(&sys, config, &model.expanded_initial_condition(order), times)?;
    let evals = traj.n_rhs_evaluations;
    Ok((MomentSeries::from_expansion(&traj, model.dim()), evals))
}

#[derive(Debug, Clone, Serialize)]
pub struct Tracking {
    pub pc: MomentSeries,
    pub mc: EnsembleStats,
    pub error: MomentError,
}

/// gPC versus Monte Carlo moments on a common grid.
#[allow(clippy::too_many_arguments)]
pub fn tracking(
    model: &ModelSpec,
    order: usize,
    mode: ProjectionMode,
    times: &[f64],
    config: &IntegratorConfig,
    n_samples: usize,
    seed: u64,
    threshold: f64,
    watch: &[usize],
) -> Result<Tracking, CliError> {
    let (pc, _) = pc_moments(model, order, mode, times, config)?;
    let mc = monte_carlo(model, n_samples, seed, times, config)?;
    let error = moment_error(&pc, &MomentSeries::from(&mc), threshold, watch)?;
    Ok(Tracking { pc, mc, error })
}

/// One scale separation of the two-time comparison.
#[derive(Debug, Clone, Serialize)]
pub struct TwoTimePoint {
    pub eps: f64,
    /// Stroboscopic times `2 pi n / omega` up to the slow horizon.
    pub times: Vec<f64>,
    pub mc: EnsembleStats,
    pub averaged: MomentSeries,
    pub full: MomentSeries,
    pub averaged_error: MomentError,
    pub full_error: MomentError,
    /// Evaluations of free runs over the whole horizon.
    pub full_evaluations: u64,
    pub averaged_evaluations: u64,
}

impl TwoTimePoint {
    pub fn max_mean_error(err: &MomentError) -> f64 {
        err.watched_mean_error().into_iter().fold(0.0, f64::max)
    }
}

/// Settings of the two-time comparison.
#[derive(Debug, Clone)]
pub struct TwoTimeStudy {
    /// Parameter overrides; `eps` is set per point and ignored here.
    pub params: BTreeMap<String, f64>,
    pub order: usize,
    pub mode: ProjectionMode,
    pub slow_horizon: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub config: IntegratorConfig,
    pub watch: Vec<usize>,
}

impl TwoTimeStudy {
    fn models(&self, eps: f64) -> Result<(ModelSpec, ModelSpec), CliError> {
        let mut full_params = self.params.clone();
        full_params.insert("eps".into(), eps);
        let full = make_model("twotime_full", &full_params)?;
        let averaged_params: BTreeMap<String, f64> = self
            .params
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "eps" | "omega"))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let averaged = make_model("twotime_averaged", &averaged_params)?;
        Ok((full, averaged))
    }

    /// Monte Carlo of the original oscillator against both expansions at
    /// the stroboscopic times, where `q = A` and `q' = omega B`.
    pub fn run_point(&self, eps: f64) -> Result<TwoTimePoint, CliError> {
        let (full_model, averaged_model) = self.models(eps)?;
        let omega = full_model.params["omega"];
        let t_max = self.slow_horizon / eps;
        let n_points = (t_max * omega / (2.0 * std::f64::consts::PI)).floor() as usize + 1;
        let times = section_times(omega, 0.0, n_points);
        let cfg = IntegratorConfig { t0: 0.0, ..self.config.clone() };

        let mc = monte_carlo(&full_model, self.n_samples, self.seed, &times, &cfg)?;
        let (full, _) = pc_moments(&full_model, self.order, self.mode, &times, &cfg)?;

        let slow_times: Vec<f64> = times.iter().map(|t| eps * t).collect();
        let (mut averaged, _) = pc_moments(&averaged_model, self.order, self.mode, &slow_times, &cfg)?;
        averaged.times = times.clone();
        for row in averaged.mean.iter_mut().chain(averaged.std.iter_mut()) {
            row[1] *= omega;
        }

        let reference = MomentSeries::from(&mc);
        let threshold = f64::INFINITY;
        let averaged_error = moment_error(&averaged, &reference, threshold, &self.watch)?;
        let full_error = moment_error(&full, &reference, threshold, &self.watch)?;

        let full_sys = full_model.project(self.order, self.mode);
        let full_evaluations =
            free_run_evaluations(&full_sys, &cfg, &full_model.expanded_initial_condition(self.order), t_max)?;
        let averaged_sys = averaged_model.project(self.order, self.mode);
        let averaged_evaluations = free_run_evaluations(
            &averaged_sys,
            &cfg,
            &averaged_model.expanded_initial_condition(self.order),
            self.slow_horizon,
        )?;
        Ok(TwoTimePoint {
            eps,
            times,
            mc,
            averaged,
            full,
            averaged_error,
            full_error,
            full_evaluations,
            averaged_evaluations,
        })
    }
}
