//! Average Hamiltonian of a gPC expansion and numerical checks that the
//! projected system is generated by it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::basis::{gauss_rule, nodes_for_degree, BasisError, BasisFamily};
use crate::field::VectorField;
use crate::galerkin::GalerkinSystem;
use crate::models::HamiltonianSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamiltonianError {
    #[error("expected {expected} coefficients, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("system does not match the Hamiltonian: {0}")]
    SystemMismatch(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// `H^(Q, P) = E[H(sum Q_k psi_k, sum P_k psi_k; lambda)]`, evaluated by a
/// Gauss rule that is exact for the polynomial integrand.
#[derive(Debug, Clone)]
pub struct AverageHamiltonian {
    source: HamiltonianSpec,
    family: BasisFamily,
    base_dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `psi[j][k] = psi_k(node_j)`.
    psi: Vec<Vec<f64>>,
}

impl AverageHamiltonian {
    /// `base_dim` is the dimension of the un-expanded state.
    pub fn new(source: HamiltonianSpec, family: BasisFamily, base_dim: usize) -> Result<Self, HamiltonianError> {
        let r = family.max_order;
        let degree = source
            .terms
            .iter()
            .map(|(_, lp, m)| *lp as usize + m.degree() as usize * r)
            .max()
            .unwrap_or(0);
        let rule = gauss_rule(family.kind, nodes_for_degree(degree))?;
        let psi = rule
            .nodes
            .iter()
            .map(|&x| {
                let mut v = vec![0.0; r + 1];
                family.kind.eval_all(x, &mut v);
                v
            })
            .collect();
        Ok(Self { source, family, base_dim, nodes: rule.nodes, weights: rule.weights, psi })
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn source(&self) -> &HamiltonianSpec {
        &self.source
    }

    pub fn expanded_dim(&self) -> usize {
        self.base_dim * (self.family.max_order + 1)
    }

    /// Evaluates at the expanded state, laid out as `x[s * n + i]`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, HamiltonianError> {
        if x.len() != self.expanded_dim() {
            return Err(HamiltonianError::SizeMismatch { expected: self.expanded_dim(), got: x.len() });
        }
        let n = self.base_dim;
        let mut base = vec![0.0; n];
        let mut total = 0.0;
        for ((&lambda, &w), psi) in self.nodes.iter().zip(&self.weights).zip(&self.psi) {
            for (i, b) in base.iter_mut().enumerate() {
                *b = psi.iter().enumerate().map(|(s, p)| x[s * n + i] * p).sum();
            }
            total += w * self.source.eval(&base, lambda);
        }
        Ok(total)
    }

    /// Central-difference gradient.
    pub fn gradient(&self, x: &[f64], h: f64) -> Result<Vec<f64>, HamiltonianError> {
        let mut xp = x.to_vec();
        let mut g = vec![0.0; x.len()];
        for j in 0..x.len() {
            xp[j] = x[j] + h;
            let fp = self.eval(&xp)?;
            xp[j] = x[j] - h;
            let fm = self.eval(&xp)?;
            xp[j] = x[j];
            g[j] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }
}

/// The r = 1 Duffing average Hamiltonian in closed form, for the state
/// `(Q0, P0, Q1, P1)`.
pub fn hpc_closed_form(x: &[f64], lambda0: f64, sigma: f64) -> f64 {
    let (q0, p0, q1, p1) = (x[0], x[1], x[2], x[3]);
    0.5 * p0 * p0 + 0.5 * p1 * p1 + 0.5 * lambda0 * (q0 * q0 + q1 * q1) + sigma * q0 * q1
        + 1.5 * q0 * q0 * q1 * q1
        + 0.25 * q0.powi(4)
        + 0.75 * q1.powi(4)
}

/// Options for [`check_hamiltonian_structure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureCheck {
    pub samples: usize,
    /// States are drawn uniformly from `[-box_half_width, box_half_width]`.
    pub box_half_width: f64,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for StructureCheck {
    fn default() -> Self {
        Self { samples: 100, box_half_width: 2.0, fd_step: 1e-5, seed: 0 }
    }
}

/// Largest residual of `dH^/dP = Q'` and `dH^/dQ = -P'` over random states,
/// using the symbolic right-hand side of `system`.
pub fn check_hamiltonian_structure(
    ah: &AverageHamiltonian,
    system: &GalerkinSystem,
    opts: StructureCheck,
) -> Result<f64, HamiltonianError> {
    if system.family() != ah.family || system.base_dim() != ah.base_dim {
        return Err(HamiltonianError::SystemMismatch(format!(
            "system has {:?} with base dimension {}, Hamiltonian has {:?} with {}",
            system.family(),
            system.base_dim(),
            ah.family,
            ah.base_dim
        )));
    }
    let n = ah.base_dim;
    let pairs: Vec<(usize, usize)> = (0..=ah.family.max_order)
        .flat_map(|s| ah.source.pairs.iter().map(move |&(q, p)| (s * n + q, s * n + p)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dim = ah.expanded_dim();
    let mut worst: f64 = 0.0;
    for _ in 0..opts.samples {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-opts.box_half_width..=opts.box_half_width)).collect();
        let grad = ah.gradient(&x, opts.fd_step)?;
        let rhs = system
            .rhs_symbolic(0.0, &x)
            .map_err(|e| HamiltonianError::SystemMismatch(e.to_string()))?;
        for &(q, p) in &pairs {
            worst = worst.max((grad[p] - rhs[q]).abs()).max((grad[q] + rhs[p]).abs());
        }
    }
    Ok(worst)
}

/// Phase-space divergence (trace of the Jacobian) of the projected field.
pub fn divergence(system: &GalerkinSystem, x: &[f64], t: f64) -> f64 {
    system.divergence(t, x)
}

/// Largest `|divergence|` over the same random sample points as
/// [`check_hamiltonian_structure`].
pub fn max_abs_divergence(system: &GalerkinSystem, opts: StructureCheck) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    (0..opts.samples)
        .map(|_| {
            let x: Vec<f64> =
                (0..system.expanded_dim()).map(|_| rng.random_range(-opts.box_half_width..=opts.box_half_width)).collect();
            system.divergence(0.0, &x).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::galerkin::ProjectionMode;
    use crate::models::{make_model, ModelSpec};

    fn average(model: &ModelSpec, order: usize) -> AverageHamiltonian {
        AverageHamiltonian::new(model.hamiltonian.clone().unwrap(), model.family(order), model.dim()).unwrap()
    }

    fn duffing() -> ModelSpec {
        make_model("duffing_unforced", &BTreeMap::new()).unwrap()
    }

    #[test]
    fn hand_evaluated_point() {
        let ah = average(&duffing(), 1);
        assert_abs_diff_eq!(ah.eval(&[1.0, 0.0, 0.0, 0.0]).unwrap(), -0.25, epsilon = 1e-14);
        assert_eq!(ah.eval(&[0.0; 4]).unwrap(), 0.0);
        assert!(matches!(ah.eval(&[0.0; 3]), Err(HamiltonianError::SizeMismatch { expected: 4, got: 3 })));
    }

    #[test]
    fn harmonic_origin_is_zero() {
        let model = make_model("harmonic_uncertain_freq", &BTreeMap::new()).unwrap();
        let ah = average(&model, 3);
        assert_eq!(ah.eval(&[0.0; 8]).unwrap(), 0.0);
    }

    #[test]
    fn matches_closed_form_at_random_points() {
        let ah = average(&duffing(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let expect = hpc_closed_form(&x, -1.0, 0.1);
            assert_abs_diff_eq!(ah.eval(&x).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn structure_holds_for_hamiltonian_models() {
        for name in ["duffing_unforced", "harmonic_uncertain_freq"] {
            let model = make_model(name, &BTreeMap::new()).unwrap();
            for r in 1..=3 {
                let sys = model.project(r, ProjectionMode::Full);
                let res = check_hamiltonian_structure(&average(&model, r), &sys, StructureCheck::default()).unwrap();
                assert!(res <= 1e-6, "{name} r={r}: residual {res}");
            }
        }
    }

    #[test]
    fn perturbed_term_is_detected() {
        let model = duffing();
        let sys = model.project(1, ProjectionMode::Full);
        let bad = sys.with_term_offset(0, 1e-2).unwrap();
        let res = check_hamiltonian_structure(&average(&model, 1), &bad, StructureCheck::default()).unwrap();
        assert!(res >= 1e-3, "residual {res}");
    }

    #[test]
    fn mismatched_system_is_rejected() {
        let model = duffing();
        let sys = model.project(2, ProjectionMode::Full);
        assert!(check_hamiltonian_structure(&average(&model, 1), &sys, StructureCheck::default()).is_err());
    }

    #[test]
    fn divergence_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = duffing();
        for r in 1..=3 {
            let sys = model.project(r, ProjectionMode::Full);
            for _ in 0..20 {
                let x: Vec<f64> = (0..sys.expanded_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
                assert!(divergence(&sys, &x, 0.3).abs() <= 1e-12);
            }
        }
        let forced = make_model("duffing_forced", &BTreeMap::new()).unwrap().project(1, ProjectionMode::Full);
        assert_abs_diff_eq!(divergence(&forced, &[0.3, -1.0, 2.0, 0.1], 1.7), -0.4, epsilon = 1e-12);
    }
}
