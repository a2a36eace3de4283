//! Dormand-Prince 5(4) with FSAL and embedded error control.

use super::{IntegrateError, StepStats};
use crate::field::VectorField;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order solution minus embedded fourth-order solution
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Tolerances and limits for [`Dopri5`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: u64,
}

/// Adaptive stepper that keeps its state between calls, so a caller can
/// advance to a sequence of output times or modify the state in between.
pub struct Dopri5<F> {
    field: F,
    opts: Dopri5Options,
    t: f64,
    x: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    x_new: Vec<f64>,
    fsal_ready: bool,
    stats: StepStats,
}

impl<F: VectorField> Dopri5<F> {
    pub fn new(field: F, t0: f64, x0: &[f64], opts: Dopri5Options) -> Result<Self, IntegrateError> {
        let n = field.dim();
        if x0.len() != n {
            return Err(IntegrateError::DimensionMismatch { expected: n, got: x0.len() });
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite { t: t0 });
        }
        Ok(Self {
            field,
            opts,
            t: t0,
            x: x0.to_vec(),
            h: 0.0,
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            x_new: vec![0.0; n],
            fsal_ready: false,
            stats: StepStats::default(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    /// Mutable access to the state; the next step re-evaluates the first stage.
    pub fn state_mut(&mut self) -> &mut [f64] {
        self.fsal_ready = false;
        &mut self.x
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    fn eval_into(&mut self, t: f64, which: usize, from_stage: bool) {
        let src = if from_stage { &self.stage } else { &self.x };
        self.field.eval(t, src, &mut self.k[which]);
        self.stats.n_rhs_evaluations += 1;
    }

    fn scaled_norm(&self, v: &[f64]) -> f64 {
        let n = v.len().max(1) as f64;
        let s: f64 = v
            .iter()
            .zip(&self.x)
            .map(|(vi, xi)| {
                let sc = self.opts.atol + self.opts.rtol * xi.abs();
                (vi / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }

    /// Hairer's starting-step heuristic; costs one extra evaluation.
    fn initial_step(&mut self, direction: f64) -> f64 {
        let d0 = self.scaled_norm(&self.x.clone());
        let d1 = self.scaled_norm(&self.k[0].clone());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.opts.h_max);
        for i in 0..self.x.len() {
            self.stage[i] = self.x[i] + direction * h0 * self.k[0][i];
        }
        self.eval_into(self.t + direction * h0, 1, true);
        let diff: Vec<f64> = self.k[1].iter().zip(&self.k[0]).map(|(a, b)| (a - b) / h0).collect();
        let d2 = self.scaled_norm(&diff);
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dmax).powf(0.2) };
        (100.0 * h0).min(h1).min(self.opts.h_max)
    }

    /// One accepted step towards `t_end`, never stepping past it.
    pub fn step(&mut self, t_end: f64) -> Result<(), IntegrateError> {
        let span = t_end - self.t;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        if !self.fsal_ready {
            self.eval_into(self.t, 0, false);
            self.fsal_ready = true;
        }
        if self.h == 0.0 {
            self.h = self.initial_step(dir);
        }
        if self.stats.n_steps >= self.opts.max_steps {
            return Err(IntegrateError::MaxSteps { t: self.t, steps: self.stats.n_steps });
        }
        let n = self.x.len();
        loop {
            let remaining = (t_end - self.t).abs();
            let last = self.h >= remaining;
            let h_abs = if last { remaining } else { self.h };
            let h = dir * h_abs;
            let t = self.t;

            macro_rules! stage {
                ($dst:expr, $c:expr, $( ($a:expr, $k:expr) ),+) => {{
                    for i in 0..n {
                        self.stage[i] = self.x[i] + h * (0.0 $( + $a * self.k[$k][i] )+);
                    }
                    self.eval_into(t + $c * h, $dst, true);
                }};
            }
            stage!(1, C2, (A21, 0));
            stage!(2, C3, (A31, 0), (A32, 1));
            stage!(3, C4, (A41, 0), (A42, 1), (A43, 2));
            stage!(4, C5, (A51, 0), (A52, 1), (A53, 2), (A54, 3));
            stage!(5, 1.0, (A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4));
            for i in 0..n {
                self.x_new[i] = self.x[i]
                    + h * (A71 * self.k[0][i] + A73 * self.k[2][i] + A74 * self.k[3][i] + A75 * self.k[4][i] + A76 * self.k[5][i]);
            }
            self.stage.copy_from_slice(&self.x_new);
            self.eval_into(t + h, 6, true);

            let mut acc = 0.0;
            let mut finite = true;
            for i in 0..n {
                let e = h
                    * (E1 * self.k[0][i] + E3 * self.k[2][i] + E4 * self.k[3][i] + E5 * self.k[4][i] + E6 * self.k[5][i]
                        + E7 * self.k[6][i]);
                let sc = self.opts.atol + self.opts.rtol * self.x[i].abs().max(self.x_new[i].abs());
                acc += (e / sc).powi(2);
                finite &= self.x_new[i].is_finite() && e.is_finite();
            }
            let err = if finite { (acc / n.max(1) as f64).sqrt() } else { f64::INFINITY };

            if err <= 1.0 {
                let fac = if err == 0.0 { FAC_MAX } else { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX) };
                let proposed = (h_abs * fac).min(self.opts.h_max);
                // a step shortened to land on t_end should not shrink the next one
                self.h = if last { proposed.max(self.h) } else { proposed };
                self.t = if last { t_end } else { t + h };
                std::mem::swap(&mut self.x, &mut self.x_new);
                self.k.swap(0, 6);
                self.stats.n_steps += 1;
                return Ok(());
            }

            self.stats.n_rejected_steps += 1;
            let fac = if finite { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0) } else { FAC_MIN };
            self.h = h_abs * fac;
            if self.h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(if finite {
                    IntegrateError::StepSizeUnderflow { t: self.t, h: self.h }
                } else {
                    IntegrateError::NonFinite { t: self.t }
                });
            }
        }
    }

    /// Steps until exactly `t_end`.
    pub fn advance_to(&mut self, t_end: f64) -> Result<(), IntegrateError> {
        while self.t != t_end {
            self.step(t_end)?;
        }
        Ok(())
    }
}
