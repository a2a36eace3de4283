//! Störmer-Verlet (kick-drift-kick leapfrog) for separable Hamiltonian
//! systems `H = T(p) + V(q)`.

use super::{IntegrateError, Trajectory};
use crate::field::{PolySystem, VectorField};

/// Position/momentum index sets of a separable system whose position rows
/// depend on momenta only and whose momentum rows depend on positions only.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSplit {
    q: Vec<usize>,
    p: Vec<usize>,
}

impl CanonicalSplit {
    /// Validates `pairs` against the term structure of `system`.
    pub fn new(system: &PolySystem, pairs: &[(usize, usize)]) -> Result<Self, IntegrateError> {
        let n = system.dim();
        let mut role = vec![None; n];
        for &(q, p) in pairs {
            for (idx, r) in [(q, true), (p, false)] {
                if idx >= n || role[idx].is_some() {
                    return Err(IntegrateError::NotSeparable(format!("index {idx} is out of range or paired twice")));
                }
                role[idx] = Some(r);
            }
        }
        if let Some(i) = role.iter().position(Option::is_none) {
            return Err(IntegrateError::NotSeparable(format!("coordinate {i} is not paired")));
        }
        if !system.is_autonomous() {
            return Err(IntegrateError::NotSeparable("system is time dependent".into()));
        }
        for term in system.terms() {
            let target_is_q = role[term.target] == Some(true);
            if let Some(&(v, _)) = term.monomial.factors().iter().find(|&&(v, _)| role[v] == Some(target_is_q)) {
                return Err(IntegrateError::NotSeparable(format!(
                    "row {} depends on coordinate {v} of the same kind",
                    term.target
                )));
            }
        }
        Ok(Self {
            q: pairs.iter().map(|&(q, _)| q).collect(),
            p: pairs.iter().map(|&(_, p)| p).collect(),
        })
    }
}

/// Fixed-step leapfrog over `t_span`, recording every `record_every` steps
/// plus the final state. The step is adjusted so that an integer number of
/// steps covers the span exactly; a backward span integrates backward.
pub fn integrate_symplectic<F: VectorField>(
    field: &F,
    split: &CanonicalSplit,
    h: f64,
    t_span: (f64, f64),
    x0: &[f64],
    record_every: usize,
) -> Result<Trajectory, IntegrateError> {
    let n = field.dim();
    if x0.len() != n {
        return Err(IntegrateError::DimensionMismatch { expected: n, got: x0.len() });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(IntegrateError::InvalidConfig(format!("step must be positive, got {h}")));
    }
    let (t0, t1) = t_span;
    let steps = ((t1 - t0).abs() / h).round().max(1.0) as u64;
    let dt = (t1 - t0) / steps as f64;
    let record_every = record_every.max(1) as u64;

    let mut x = x0.to_vec();
    let mut f = vec![0.0; n];
    let mut traj = Trajectory::default();
    traj.push(t0, &x);
    field.eval(t0, &x, &mut f);
    traj.n_rhs_evaluations += 1;
    for step in 1..=steps {
        for &p in &split.p {
            x[p] += 0.5 * dt * f[p];
        }
        field.eval(t0, &x, &mut f);
        for &q in &split.q {
            x[q] += dt * f[q];
        }
        field.eval(t0, &x, &mut f);
        for &p in &split.p {
            x[p] += 0.5 * dt * f[p];
        }
        traj.n_rhs_evaluations += 2;
        traj.n_steps += 1;
        if step % record_every == 0 || step == steps {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(IntegrateError::NonFinite { t: t0 + step as f64 * dt });
            }
            let t = if step == steps { t1 } else { t0 + step as f64 * dt };
            traj.push(t, &x);
        }
    }
    Ok(traj)
}
