//! Time integration: adaptive Dormand-Prince 5(4), fixed-step RK4,
//! Störmer-Verlet leapfrog and tangent (variational) flows.

mod dopri;
mod rk4;
mod symplectic;
mod variational;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::VectorField;

pub use dopri::{Dopri5, Dopri5Options};
pub use rk4::Rk4;
pub use symplectic::{integrate_symplectic, CanonicalSplit};
pub use variational::{integrate_variational, Tangent, VariationalSolution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step limit of {steps} reached at t = {t}")]
    MaxSteps { t: f64, steps: u64 },
    #[error("system is not separable Hamiltonian: {0}")]
    NotSeparable(String),
    #[error("Störmer-Verlet needs a canonical split; use integrate_symplectic")]
    NeedsCanonicalSplit,
    #[error("expected state of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub n_rhs_evaluations: u64,
    pub n_steps: u64,
    pub n_rejected_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk45Adaptive,
    Rk4Fixed,
    StormerVerlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Step for the fixed-step methods.
    pub h: f64,
    pub t0: f64,
    pub t1: f64,
    /// Largest adaptive step; unbounded when absent.
    pub h_max: Option<f64>,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45Adaptive,
            rtol: 1e-6,
            atol: 1e-9,
            h: 0.01,
            t0: 0.0,
            t1: 1.0,
            h_max: None,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn span(t0: f64, t1: f64) -> Self {
        Self { t0, t1, ..Self::default() }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |m: String| Err(IntegrateError::InvalidConfig(m));
        if !(self.t0.is_finite() && self.t1.is_finite()) || self.t0 == self.t1 {
            return bad(format!("time span [{}, {}] is degenerate", self.t0, self.t1));
        }
        match self.method {
            Method::Rk45Adaptive => {
                if !(self.rtol > 0.0) || !(self.atol > 0.0) {
                    return bad(format!("rtol and atol must be positive, got {} and {}", self.rtol, self.atol));
                }
                if let Some(h) = self.h_max {
                    if !(h > 0.0) {
                        return bad(format!("h_max must be positive, got {h}"));
                    }
                }
            }
            Method::Rk4Fixed | Method::StormerVerlet => {
                if !(self.h > 0.0) || !self.h.is_finite() {
                    return bad(format!("step h must be positive, got {}", self.h));
                }
            }
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }

    pub fn dopri_options(&self) -> Dopri5Options {
        Dopri5Options {
            rtol: self.rtol,
            atol: self.atol,
            h_max: self.h_max.unwrap_or(f64::INFINITY),
            max_steps: self.max_steps,
        }
    }
}

/// Which states to record.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// The initial state and every accepted step.
    EveryStep,
    /// Exactly these times, which must be monotone in the direction of
    /// integration and lie within the span. The solver steps to each one.
    Times(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub n_rhs_evaluations: u64,
    pub n_steps: u64,
    pub n_rejected_steps: u64,
}

impl Trajectory {
    pub(crate) fn push(&mut self, t: f64, x: &[f64]) {
        self.times.push(t);
        self.states.push(x.to_vec());
    }

    fn set_stats(&mut self, s: StepStats) {
        self.n_rhs_evaluations = s.n_rhs_evaluations;
        self.n_steps = s.n_steps;
        self.n_rejected_steps = s.n_rejected_steps;
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// The time series of one coordinate.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }
}

fn check_times(config: &IntegratorConfig, times: &[f64]) -> Result<(), IntegrateError> {
    let dir = (config.t1 - config.t0).signum();
    let (lo, hi) = if dir > 0.0 { (config.t0, config.t1) } else { (config.t1, config.t0) };
    for w in times.windows(2) {
        if (w[1] - w[0]) * dir <= 0.0 {
            return Err(IntegrateError::InvalidConfig("output times must be strictly monotone".into()));
        }
    }
    if let Some(t) = times.iter().find(|t| !(**t >= lo && **t <= hi)) {
        return Err(IntegrateError::InvalidConfig(format!("output time {t} lies outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Integrates `field` from `config.t0` to `config.t1`.
///
/// Störmer-Verlet needs to know the canonical pairing and is reached through
/// [`integrate_symplectic`] instead.
pub fn integrate<F: VectorField>(
    field: &F,
    config: &IntegratorConfig,
    x0: &[f64],
    output: &Output,
) -> Result<Trajectory, IntegrateError> {
    config.validate()?;
    if x0.len() != field.dim() {
        return Err(IntegrateError::DimensionMismatch { expected: field.dim(), got: x0.len() });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFinite { t: config.t0 });
    }
    if let Output::Times(ts) = output {
        check_times(config, ts)?;
    }
    match config.method {
        Method::Rk45Adaptive => {
            let mut s = Dopri5::new(field, config.t0, x0, config.dopri_options())?;
            drive(&mut s, config.t1, output)
        }
        Method::Rk4Fixed => {
            let mut s = Rk4::new(field, config.t0, x0, config.h, config.max_steps)?;
            drive(&mut s, config.t1, output)
        }
        Method::StormerVerlet => Err(IntegrateError::NeedsCanonicalSplit),
    }
}

trait Stepper {
    fn t(&self) -> f64;
    fn state(&self) -> &[f64];
    fn stats(&self) -> StepStats;
    fn step_to(&mut self, t_end: f64) -> Result<(), IntegrateError>;
}

impl<F: VectorField> Stepper for Dopri5<F> {
    fn t(&self) -> f64 {
        Dopri5::t(self)
    }
    fn state(&self) -> &[f64] {
        Dopri5::state(self)
    }
    fn stats(&self) -> StepStats {
        Dopri5::stats(self)
    }
    fn step_to(&mut self, t_end: f64) -> Result<(), IntegrateError> {
        self.step(t_end)
    }
}

impl<F: VectorField> Stepper for Rk4<F> {
    fn t(&self) -> f64 {
        Rk4::t(self)
    }
    fn state(&self) -> &[f64] {
        Rk4::state(self)
    }
    fn stats(&self) -> StepStats {
        Rk4::stats(self)
    }
    fn step_to(&mut self, t_end: f64) -> Result<(), IntegrateError> {
        self.step(t_end)
    }
}

fn drive<S: Stepper>(s: &mut S, t1: f64, output: &Output) -> Result<Trajectory, IntegrateError> {
    let mut traj = Trajectory::default();
    match output {
        Output::EveryStep => {
            traj.push(s.t(), s.state());
            while s.t() != t1 {
                s.step_to(t1)?;
                traj.push(s.t(), s.state());
            }
        }
        Output::Times(ts) => {
            for &t in ts {
                while s.t() != t {
                    s.step_to(t)?;
                }
                traj.push(t, s.state());
            }
        }
    }
    traj.set_stats(s.stats());
    Ok(traj)
}
