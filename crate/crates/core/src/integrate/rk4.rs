use super::{IntegrateError, StepStats};
use crate::field::VectorField;

/// Classic fixed-step fourth-order Runge-Kutta. The final step into an
/// output time is shortened so outputs land exactly.
pub struct Rk4<F> {
    field: F,
    t: f64,
    x: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    max_steps: u64,
    stats: StepStats,
}

impl<F: VectorField> Rk4<F> {
    pub fn new(field: F, t0: f64, x0: &[f64], h: f64, max_steps: u64) -> Result<Self, IntegrateError> {
        let n = field.dim();
        if x0.len() != n {
            return Err(IntegrateError::DimensionMismatch { expected: n, got: x0.len() });
        }
        Ok(Self {
            field,
            t: t0,
            x: x0.to_vec(),
            h,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            max_steps,
            stats: StepStats::default(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    pub fn step(&mut self, t_end: f64) -> Result<(), IntegrateError> {
        let span = t_end - self.t;
        if span == 0.0 {
            return Ok(());
        }
        if self.stats.n_steps >= self.max_steps {
            return Err(IntegrateError::MaxSteps { t: self.t, steps: self.stats.n_steps });
        }
        let remaining = span.abs();
        // absorb a sliver left by accumulated round-off into this step
        let last = self.h * (1.0 + 1e-9) >= remaining;
        let h = span.signum() * if last { remaining } else { self.h };
        let n = self.x.len();
        let t = self.t;
        self.field.eval(t, &self.x, &mut self.k[0]);
        for i in 0..n {
            self.tmp[i] = self.x[i] + 0.5 * h * self.k[0][i];
        }
        self.field.eval(t + 0.5 * h, &self.tmp, &mut self.k[1]);
        for i in 0..n {
            self.tmp[i] = self.x[i] + 0.5 * h * self.k[1][i];
        }
        self.field.eval(t + 0.5 * h, &self.tmp, &mut self.k[2]);
        for i in 0..n {
            self.tmp[i] = self.x[i] + h * self.k[2][i];
        }
        self.field.eval(t + h, &self.tmp, &mut self.k[3]);
        for i in 0..n {
            self.x[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        self.stats.n_rhs_evaluations += 4;
        self.stats.n_steps += 1;
        self.t = if last { t_end } else { t + h };
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite { t: self.t });
        }
        Ok(())
    }

    pub fn advance_to(&mut self, t_end: f64) -> Result<(), IntegrateError> {
        while self.t != t_end {
            self.step(t_end)?;
        }
        Ok(())
    }
}
