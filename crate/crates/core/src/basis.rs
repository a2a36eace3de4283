//! Univariate orthonormal polynomial families and matched Gauss rules.
//!
//! Two families are supported:
//!
//! * probabilists' Hermite, orthonormal under the standard Gaussian density,
//!   `psi_k = He_k / sqrt(k!)`;
//! * Legendre, orthonormal under the uniform density `1/2` on `[-1, 1]`,
//!   `psi_k = sqrt(2k + 1) P_k`.
//!
//! Quadrature weights always embed the density, so they sum to one and
//! `sum_j w_j f(x_j)` approximates `E[f(lambda)]` directly.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("basis order {order} exceeds the family maximum {max_order}")]
    OrderOutOfRange { order: usize, max_order: usize },
    #[error("a quadrature rule needs at least one node")]
    NoNodes,
}

/// The density an uncertain standardized variable follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Standard Gaussian density, probabilists' Hermite polynomials.
    HermiteGaussian,
    /// Uniform density 1/2 on [-1, 1], Legendre polynomials.
    LegendreUniform,
}

impl BasisKind {
    /// Off-diagonal entry `b_k` of the symmetric Jacobi matrix, i.e. the
    /// coefficient in `x psi_{k-1} = b_k psi_k + a_{k-1} psi_{k-1} + b_{k-1} psi_{k-2}`.
    /// Both densities are symmetric so every `a_k` vanishes.
    fn recurrence_b(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            BasisKind::HermiteGaussian => k.sqrt(),
            BasisKind::LegendreUniform => k / (4.0 * k * k - 1.0).sqrt(),
        }
    }

    /// Fills `out[0..out.len()]` with `psi_0(x) .. psi_{len-1}(x)`.
    pub fn eval_all(self, x: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        out[1] = x / self.recurrence_b(1);
        for k in 1..out.len() - 1 {
            let b_next = self.recurrence_b(k + 1);
            let b_cur = self.recurrence_b(k);
            out[k + 1] = (x * out[k] - b_cur * out[k - 1]) / b_next;
        }
    }

    /// Value and derivative of `psi_n` at `x`.
    fn eval_with_derivative(self, n: usize, x: f64) -> (f64, f64) {
        let (mut p_prev, mut p) = (0.0, 1.0);
        let (mut d_prev, mut d) = (0.0, 0.0);
        for k in 0..n {
            let b_next = self.recurrence_b(k + 1);
            let b_cur = if k == 0 { 0.0 } else { self.recurrence_b(k) };
            let p_next = (x * p - b_cur * p_prev) / b_next;
            let d_next = (p + x * d - b_cur * d_prev) / b_next;
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
        }
        (p, d)
    }

    /// Degree-`degree` moment `E[lambda^degree]` of the density.
    pub fn raw_moment(self, degree: u32) -> f64 {
        if degree % 2 == 1 {
            return 0.0;
        }
        match self {
            // (degree - 1)!!
            BasisKind::HermiteGaussian => (1..degree).step_by(2).map(f64::from).product(),
            BasisKind::LegendreUniform => 1.0 / f64::from(degree + 1),
        }
    }
}

/// A basis family truncated at `max_order`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisFamily {
    pub kind: BasisKind,
    pub max_order: usize,
}

impl BasisFamily {
    pub fn new(kind: BasisKind, max_order: usize) -> Self {
        Self { kind, max_order }
    }

    pub fn hermite(max_order: usize) -> Self {
        Self::new(BasisKind::HermiteGaussian, max_order)
    }

    pub fn legendre(max_order: usize) -> Self {
        Self::new(BasisKind::LegendreUniform, max_order)
    }

    /// Number of basis functions, `max_order + 1`.
    pub fn len(&self) -> usize {
        self.max_order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check_order(&self, order: usize) -> Result<(), BasisError> {
        if order > self.max_order {
            Err(BasisError::OrderOutOfRange {
                order,
                max_order: self.max_order,
            })
        } else {
            Ok(())
        }
    }

    /// `psi_k(x)`.
    pub fn eval(&self, k: usize, x: f64) -> Result<f64, BasisError> {
        self.check_order(k)?;
        let mut vals = vec![0.0; k + 1];
        self.kind.eval_all(x, &mut vals);
        Ok(vals[k])
    }

    /// `E[lambda^lambda_power * prod_j psi_{orders[j]}(lambda)]`, evaluated by a
    /// Gauss rule that is exact for the total polynomial degree.
    pub fn expectation_moment(&self, orders: &[usize], lambda_power: u32) -> Result<f64, BasisError> {
        for &k in orders {
            self.check_order(k)?;
        }
        Ok(expectation_unchecked(self.kind, orders, lambda_power))
    }
}

/// Smallest node count that integrates degree `degree` exactly.
pub fn nodes_for_degree(degree: usize) -> usize {
    (degree + 2) / 2
}

pub(crate) fn expectation_unchecked(kind: BasisKind, orders: &[usize], lambda_power: u32) -> f64 {
    let degree: usize = orders.iter().sum::<usize>() + lambda_power as usize;
    if degree % 2 == 1 {
        return 0.0;
    }
    // A factor of order k is orthogonal to everything of lower total degree.
    if let Some(&max) = orders.iter().max() {
        if max > degree - max {
            return 0.0;
        }
    }
    let rule = gauss_rule(kind, nodes_for_degree(degree)).expect("node count is positive");
    let top = orders.iter().copied().max().unwrap_or(0);
    let mut psi = vec![0.0; top + 1];
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| {
            kind.eval_all(x, &mut psi);
            let prod: f64 = orders.iter().map(|&k| psi[k]).product();
            w * x.powi(lambda_power as i32) * prod
        })
        .sum()
}

/// Nodes and density-weighted weights of an n-point Gauss rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_j w_j f(x_j)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss rule for the family's density with `n` nodes, exact for degree
/// `<= 2n - 1`.
///
/// Nodes come from the eigenvalues of the Jacobi matrix (Golub-Welsch) and
/// are polished with a few Newton steps on `psi_n`; weights use the
/// Christoffel form `1 / sum_{k<n} psi_k(x_j)^2`, which is accurate to a few
/// ulps for every node.
pub fn gauss_rule(kind: BasisKind, n: usize) -> Result<QuadratureRule, BasisError> {
    if n == 0 {
        return Err(BasisError::NoNodes);
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j {
            kind.recurrence_b(j)
        } else if j + 1 == i {
            kind.recurrence_b(i)
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = kind.eval_with_derivative(n, *x);
            if dp == 0.0 {
                break;
            }
            let dx = p / dp;
            *x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // Symmetric densities: enforce exact antisymmetry of the node set.
    for j in 0..n / 2 {
        let m = 0.5 * (nodes[n - 1 - j] - nodes[j]);
        nodes[j] = -m;
        nodes[n - 1 - j] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let mut psi = vec![0.0; n];
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            kind.eval_all(x, &mut psi);
            1.0 / psi.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    for j in 0..n / 2 {
        let w = 0.5 * (weights[j] + weights[n - 1 - j]);
        weights[j] = w;
        weights[n - 1 - j] = w;
    }
    Ok(QuadratureRule { nodes, weights })
}
