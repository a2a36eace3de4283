//! Vector fields polynomial in the state and in one standardized uncertain
//! variable, and their Galerkin projection onto an orthonormal basis.
//!
//! Expanded coefficients are laid out order-major: coefficient `s` of base
//! coordinate `i` lives at index `s * base_dim + i`, so a two-dimensional
//! `(q, p)` system expanded to first order reads `(Q0, P0, Q1, P1)`.

mod document;

pub(crate) use document::render_monomial;
pub use document::{SystemDocument, TermRecord};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{self, BasisFamily};
use crate::field::{Forcing, Monomial, PolySystem, PolyTerm, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GalerkinError {
    #[error("term {term} targets state {target} but the field has dimension {dim}")]
    TargetOutOfRange { term: usize, target: usize, dim: usize },
    #[error("term {term} references state {var} but the field has dimension {dim}")]
    VariableOutOfRange { term: usize, var: usize, dim: usize },
    #[error("coefficient of term {term} is not finite")]
    NonFiniteCoefficient { term: usize },
    #[error("expected {expected} state names, got {got}")]
    NameCount { expected: usize, got: usize },
    #[error("state has length {got}, system expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("term index {index} out of range ({len} terms)")]
    NoSuchTerm { index: usize, len: usize },
}

/// One monomial term of a [`PolynomialVectorField`]:
/// `coeff * lambda^lambda_power * prod_j x_j^{e_j} * forcing(t)` added to `dx[target]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub target: usize,
    pub coeff: f64,
    #[serde(default)]
    pub lambda_power: u32,
    pub monomial: Monomial,
    #[serde(default)]
    pub forcing: Forcing,
}

impl Term {
    pub fn new(target: usize, coeff: f64) -> Self {
        Self {
            target,
            coeff,
            lambda_power: 0,
            monomial: Monomial::one(),
            forcing: Forcing::None,
        }
    }

    pub fn state(mut self, var: usize, exp: u32) -> Self {
        self.monomial.mul_var(var, exp);
        self
    }

    pub fn lambda(mut self, power: u32) -> Self {
        self.lambda_power = power;
        self
    }

    pub fn forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }
}

/// An ODE right-hand side polynomial in the state and in the standardized
/// uncertain variable `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialVectorField {
    dim: usize,
    terms: Vec<Term>,
    param_name: String,
    state_names: Vec<String>,
    coefficient_symbols: Vec<String>,
}

impl PolynomialVectorField {
    pub fn new<S: Into<String>>(
        state_names: Vec<S>,
        param_name: impl Into<String>,
        terms: Vec<Term>,
    ) -> Result<Self, GalerkinError> {
        let state_names: Vec<String> = state_names.into_iter().map(Into::into).collect();
        let dim = state_names.len();
        for (k, t) in terms.iter().enumerate() {
            if t.target >= dim {
                return Err(GalerkinError::TargetOutOfRange { term: k, target: t.target, dim });
            }
            if let Some(&(var, _)) = t.monomial.factors().iter().find(|&&(v, _)| v >= dim) {
                return Err(GalerkinError::VariableOutOfRange { term: k, var, dim });
            }
            if !t.coeff.is_finite() {
                return Err(GalerkinError::NonFiniteCoefficient { term: k });
            }
        }
        let coefficient_symbols = state_names.iter().map(|s| s.to_uppercase()).collect();
        Ok(Self {
            dim,
            terms,
            param_name: param_name.into(),
            state_names,
            coefficient_symbols,
        })
    }

    /// Overrides the symbols used to name expansion coefficients
    /// (default: upper-cased state names).
    pub fn with_coefficient_symbols<S: Into<String>>(mut self, symbols: Vec<S>) -> Result<Self, GalerkinError> {
        if symbols.len() != self.dim {
            return Err(GalerkinError::NameCount { expected: self.dim, got: symbols.len() });
        }
        self.coefficient_symbols = symbols.into_iter().map(Into::into).collect();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn param_name(&self) -> &str {
        &self.param_name
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn coefficient_symbols(&self) -> &[String] {
        &self.coefficient_symbols
    }

    pub fn is_autonomous(&self) -> bool {
        self.terms.iter().all(|t| t.forcing.is_none())
    }

    /// Whether any term depends on the uncertain variable.
    pub fn depends_on_lambda(&self) -> bool {
        self.terms.iter().any(|t| t.lambda_power > 0)
    }

    /// The deterministic field obtained by fixing `lambda`.
    pub fn at_parameter(&self, lambda: f64) -> PolySystem {
        let terms = self
            .terms
            .iter()
            .map(|t| PolyTerm {
                target: t.target,
                coeff: t.coeff * lambda.powi(t.lambda_power as i32),
                monomial: t.monomial.clone(),
                forcing: t.forcing,
            })
            .collect();
        PolySystem::new(self.dim, terms)
    }

    pub fn eval(&self, t: f64, x: &[f64], lambda: f64, dx: &mut [f64]) {
        dx.iter_mut().for_each(|v| *v = 0.0);
        for term in &self.terms {
            dx[term.target] += term.coeff
                * lambda.powi(term.lambda_power as i32)
                * term.forcing.value(t)
                * term.monomial.eval(x);
        }
    }

    /// Highest polynomial degree in `lambda` of a projection integrand
    /// `f_i(sum_k X_k psi_k; lambda) psi_s` at truncation order `r`.
    fn projection_degree(&self, r: usize) -> usize {
        self.terms
            .iter()
            .map(|t| t.lambda_power as usize + t.monomial.degree() as usize * r + r)
            .max()
            .unwrap_or(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Keep every expanded monomial.
    #[default]
    Full,
    /// Drop expanded monomials of combined degree > 1 in the coefficients of
    /// order >= 1, i.e. linearize the dynamics of the fluctuations about the
    /// mean.
    LinearizedFluctuations,
}

#[derive(Debug, Clone, PartialEq)]
struct Spectral {
    weights: Vec<f64>,
    /// `psi[j][k] = psi_k(node_j)`.
    psi: Vec<Vec<f64>>,
    /// The base field frozen at each node.
    node_fields: Vec<PolySystem>,
}

/// The deterministic ODE for the gPC coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinSystem {
    family: BasisFamily,
    mode: ProjectionMode,
    base_dim: usize,
    variable_names: Vec<String>,
    expanded: PolySystem,
    spectral: Option<Spectral>,
}

/// Galerkin projection of `field` onto `family` (truncated at
/// `family.max_order`).
pub fn project(field: &PolynomialVectorField, family: BasisFamily, mode: ProjectionMode) -> GalerkinSystem {
    let n = field.dim();
    let r = family.max_order;
    let kind = family.kind;
    let mut cache: HashMap<(Vec<usize>, u32), f64> = HashMap::new();
    let mut expectation = |mut orders: Vec<usize>, lp: u32| -> f64 {
        orders.sort_unstable();
        *cache
            .entry((orders, lp))
            .or_insert_with_key(|(o, lp)| clean(basis::expectation_unchecked(kind, o, *lp)))
    };

    let mut expanded = Vec::new();
    for term in field.terms() {
        for combo in expansions(term.monomial.factors(), r) {
            if mode == ProjectionMode::LinearizedFluctuations && combo.fluctuation_degree > 1 {
                continue;
            }
            let monomial = Monomial::from_pairs(combo.powers.iter().map(|&(j, k, m)| (k * n + j, m)));
            for s in 0..=r {
                let mut orders = combo.orders.clone();
                orders.push(s);
                let e = expectation(orders, term.lambda_power);
                if e == 0.0 {
                    continue;
                }
                expanded.push(PolyTerm {
                    target: s * n + term.target,
                    coeff: term.coeff * combo.multiplicity * e,
                    monomial: monomial.clone(),
                    forcing: term.forcing,
                });
            }
        }
    }

    let spectral = match mode {
        ProjectionMode::Full => {
            let nodes = basis::nodes_for_degree(field.projection_degree(r));
            let rule = basis::gauss_rule(kind, nodes).expect("node count is positive");
            let psi = rule
                .nodes
                .iter()
                .map(|&x| {
                    let mut v = vec![0.0; r + 1];
                    kind.eval_all(x, &mut v);
                    v
                })
                .collect();
            let node_fields = rule.nodes.iter().map(|&x| field.at_parameter(x)).collect();
            Some(Spectral { weights: rule.weights, psi, node_fields })
        }
        ProjectionMode::LinearizedFluctuations => None,
    };

    let symbols = field.coefficient_symbols();
    let variable_names = (0..=r)
        .flat_map(|s| symbols.iter().map(move |sym| format!("{sym}{s}")))
        .collect();

    GalerkinSystem {
        family,
        mode,
        base_dim: n,
        variable_names,
        expanded: PolySystem::new(n * (r + 1), expanded),
        spectral,
    }
}

/// Quadrature round-off on a structurally nonzero moment never gets this
/// small; anything below it is an exact zero.
fn clean(e: f64) -> f64 {
    if e.abs() < 1e-13 {
        0.0
    } else {
        e
    }
}

struct Expansion {
    /// `(state j, order k, power m)` with `m > 0`.
    powers: Vec<(usize, usize, u32)>,
    /// Basis orders appearing in the product, with repetition.
    orders: Vec<usize>,
    multiplicity: f64,
    fluctuation_degree: u32,
}

/// All monomials in the expansion of `prod_j (sum_{k<=r} X_{jk} psi_k)^{e_j}`.
fn expansions(factors: &[(usize, u32)], r: usize) -> Vec<Expansion> {
    let mut out = vec![Expansion { powers: Vec::new(), orders: Vec::new(), multiplicity: 1.0, fluctuation_degree: 0 }];
    for &(j, e) in factors {
        let splits = compositions(e, r + 1);
        let mut next = Vec::with_capacity(out.len() * splits.len());
        for base in &out {
            for split in &splits {
                let mut ex = Expansion {
                    powers: base.powers.clone(),
                    orders: base.orders.clone(),
                    multiplicity: base.multiplicity * multinomial(e, split),
                    fluctuation_degree: base.fluctuation_degree,
                };
                for (k, &m) in split.iter().enumerate().filter(|(_, &m)| m > 0) {
                    ex.powers.push((j, k, m));
                    ex.orders.extend(std::iter::repeat_n(k, m as usize));
                    if k > 0 {
                        ex.fluctuation_degree += m;
                    }
                }
                next.push(ex);
            }
        }
        out = next;
    }
    out
}

/// All vectors of `parts` nonnegative integers summing to `total`.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn multinomial(total: u32, split: &[u32]) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    fact(total) / split.iter().map(|&m| fact(m)).product::<f64>()
}

impl GalerkinSystem {
    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn order(&self) -> usize {
        self.family.max_order
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn expanded_dim(&self) -> usize {
        self.expanded.dim()
    }

    pub fn index(&self, coordinate: usize, order: usize) -> usize {
        order * self.base_dim + coordinate
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    /// The expanded term list.
    pub fn terms(&self) -> &[PolyTerm] {
        self.expanded.terms()
    }

    pub fn symbolic(&self) -> &PolySystem {
        &self.expanded
    }

    pub fn uses_pseudo_spectral(&self) -> bool {
        self.spectral.is_some()
    }

    /// Checked right-hand side.
    pub fn rhs(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, GalerkinError> {
        self.check_len(x.len())?;
        let mut dx = vec![0.0; x.len()];
        self.eval(t, x, &mut dx);
        Ok(dx)
    }

    /// Right-hand side from the expanded term list.
    pub fn rhs_symbolic(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, GalerkinError> {
        self.check_len(x.len())?;
        let mut dx = vec![0.0; x.len()];
        self.expanded.eval(t, x, &mut dx);
        Ok(dx)
    }

    /// Checked row-major Jacobian.
    pub fn jacobian_matrix(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, GalerkinError> {
        self.check_len(x.len())?;
        let n = x.len();
        let mut jac = vec![0.0; n * n];
        self.expanded.jacobian(t, x, &mut jac);
        Ok(jac)
    }

    fn check_len(&self, got: usize) -> Result<(), GalerkinError> {
        if got != self.expanded_dim() {
            return Err(GalerkinError::DimensionMismatch { expected: self.expanded_dim(), got });
        }
        Ok(())
    }

    /// Mean and variance of every base coordinate.
    pub fn moments(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        moments(x, self.base_dim, self.order())
    }

    /// A copy with one expanded term's coefficient shifted by `delta`.
    /// The copy evaluates symbolically so the change is visible to `eval`.
    pub fn with_term_offset(&self, index: usize, delta: f64) -> Result<Self, GalerkinError> {
        let len = self.terms().len();
        if index >= len {
            return Err(GalerkinError::NoSuchTerm { index, len });
        }
        let mut terms = self.terms().to_vec();
        terms[index].coeff += delta;
        Ok(Self {
            expanded: PolySystem::new(self.expanded_dim(), terms),
            spectral: None,
            ..self.clone()
        })
    }

    /// Serializable description of the expanded term list.
    pub fn document(&self) -> SystemDocument {
        SystemDocument::from_system(self)
    }

    fn eval_spectral(spec: &Spectral, n: usize, r: usize, t: f64, x: &[f64], dx: &mut [f64]) {
        dx.iter_mut().for_each(|v| *v = 0.0);
        let mut xs = vec![0.0; n];
        let mut fs = vec![0.0; n];
        for ((w, psi), node_field) in spec.weights.iter().zip(&spec.psi).zip(&spec.node_fields) {
            for (i, xi) in xs.iter_mut().enumerate() {
                *xi = (0..=r).map(|k| x[k * n + i] * psi[k]).sum();
            }
            node_field.eval(t, &xs, &mut fs);
            for s in 0..=r {
                let ws = w * psi[s];
                for i in 0..n {
                    dx[s * n + i] += ws * fs[i];
                }
            }
        }
    }
}

impl VectorField for GalerkinSystem {
    fn dim(&self) -> usize {
        self.expanded.dim()
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        match &self.spectral {
            Some(spec) => Self::eval_spectral(spec, self.base_dim, self.order(), t, x, dx),
            None => self.expanded.eval(t, x, dx),
        }
    }

    fn jacobian(&self, t: f64, x: &[f64], jac: &mut [f64]) {
        self.expanded.jacobian(t, x, jac)
    }
}

/// Mean `X_{i0}` and variance `sum_{k>=1} X_{ik}^2` per base coordinate;
/// valid for any orthonormal basis with `psi_0 = 1`.
pub fn moments(x: &[f64], base_dim: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let mean = x[..base_dim].to_vec();
    let var = (0..base_dim)
        .map(|i| (1..=order).map(|k| x[k * base_dim + i].powi(2)).sum())
        .collect();
    (mean, var)
}
