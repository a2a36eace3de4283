//! Tangent (variational) flow `V' = J(x, t) V` carried alongside the state.

use nalgebra::DMatrix;

use super::{integrate, IntegrateError, IntegratorConfig, Output, Trajectory};
use crate::field::VectorField;

/// The augmented field `(x, V)` with `V` stored column-major after `x`.
pub struct Tangent<F> {
    field: F,
    cols: usize,
}

impl<F: VectorField> Tangent<F> {
    pub fn new(field: F, cols: usize) -> Self {
        Self { field, cols }
    }

    pub fn base_dim(&self) -> usize {
        self.field.dim()
    }
}

impl<F: VectorField> VectorField for Tangent<F> {
    fn dim(&self) -> usize {
        self.field.dim() * (1 + self.cols)
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        let n = self.field.dim();
        self.field.eval(t, &x[..n], &mut dx[..n]);
        let mut jac = vec![0.0; n * n];
        self.field.jacobian(t, &x[..n], &mut jac);
        for c in 0..self.cols {
            let v = &x[n + c * n..n + (c + 1) * n];
            let out = &mut dx[n + c * n..n + (c + 1) * n];
            for (i, o) in out.iter_mut().enumerate() {
                *o = jac[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum();
            }
        }
    }
}

/// Base trajectory plus the fundamental matrix at every output time.
#[derive(Debug, Clone)]
pub struct VariationalSolution {
    pub trajectory: Trajectory,
    pub fundamental: Vec<DMatrix<f64>>,
}

/// Integrates the state together with `Phi' = J Phi`, `Phi(t0) = m0`.
/// Error control covers both the state and the tangent matrix.
pub fn integrate_variational<F: VectorField>(
    field: &F,
    config: &IntegratorConfig,
    x0: &[f64],
    m0: &DMatrix<f64>,
    output: &Output,
) -> Result<VariationalSolution, IntegrateError> {
    let n = field.dim();
    if x0.len() != n {
        return Err(IntegrateError::DimensionMismatch { expected: n, got: x0.len() });
    }
    if m0.nrows() != n {
        return Err(IntegrateError::DimensionMismatch { expected: n, got: m0.nrows() });
    }
    let cols = m0.ncols();
    let tangent = Tangent::new(field, cols);
    let mut y0 = x0.to_vec();
    y0.extend(m0.iter());
    let full = integrate(&tangent, config, &y0, output)?;
    let fundamental = full
        .states
        .iter()
        .map(|s| DMatrix::from_column_slice(n, cols, &s[n..]))
        .collect();
    let trajectory = Trajectory {
        states: full.states.iter().map(|s| s[..n].to_vec()).collect(),
        ..full
    };
    Ok(VariationalSolution { trajectory, fundamental })
}
