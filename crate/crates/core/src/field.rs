//! Vector fields: the evaluation trait used by every integrator, and the
//! sparse polynomial representation shared by models and Galerkin systems.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Right-hand side of `x' = f(t, x)`.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]);

    /// Row-major `dim x dim` Jacobian `d f_i / d x_j`.
    ///
    /// The default uses central differences; polynomial fields override it
    /// with exact derivatives.
    fn jacobian(&self, t: f64, x: &[f64], jac: &mut [f64]) {
        let n = self.dim();
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..n {
            let h = 1e-6 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            self.eval(t, &xp, &mut fp);
            xp[j] = x[j] - h;
            self.eval(t, &xp, &mut fm);
            xp[j] = x[j];
            for i in 0..n {
                jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
    }

    /// Divergence `tr(J)`.
    fn divergence(&self, t: f64, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut jac = vec![0.0; n * n];
        self.jacobian(t, x, &mut jac);
        (0..n).map(|i| jac[i * n + i]).sum()
    }
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (**self).eval(t, x, dx)
    }
    fn jacobian(&self, t: f64, x: &[f64], jac: &mut [f64]) {
        (**self).jacobian(t, x, jac)
    }
}

/// A closure-backed field, mostly for tests and ad-hoc experiments.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.f)(t, x, dx)
    }
}

/// Time dependence of a term: constant, `cos(omega t)` or `sin(omega t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Forcing {
    #[default]
    None,
    Cos { omega: f64 },
    Sin { omega: f64 },
}

impl Forcing {
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Forcing::None => 1.0,
            Forcing::Cos { omega } => (omega * t).cos(),
            Forcing::Sin { omega } => (omega * t).sin(),
        }
    }

    pub fn omega(&self) -> Option<f64> {
        match *self {
            Forcing::None => None,
            Forcing::Cos { omega } | Forcing::Sin { omega } => Some(omega),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Forcing::None)
    }

    fn rank(&self) -> (u8, u64) {
        match *self {
            Forcing::None => (0, 0),
            Forcing::Cos { omega } => (1, omega.to_bits()),
            Forcing::Sin { omega } => (2, omega.to_bits()),
        }
    }

    pub(crate) fn total_cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl fmt::Display for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::None => Ok(()),
            Forcing::Cos { omega } => write!(f, "cos({omega} t)"),
            Forcing::Sin { omega } => write!(f, "sin({omega} t)"),
        }
    }
}

/// Product of variable powers, stored as `(variable, exponent)` pairs sorted
/// by variable with strictly positive exponents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Monomial(Vec<(usize, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Self(Vec::new())
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, u32)>>(pairs: I) -> Self {
        let mut m = Self::one();
        for (v, e) in pairs {
            m.mul_var(v, e);
        }
        m
    }

    pub fn mul_var(&mut self, var: usize, exp: u32) {
        if exp == 0 {
            return;
        }
        match self.0.binary_search_by_key(&var, |&(v, _)| v) {
            Ok(pos) => self.0[pos].1 += exp,
            Err(pos) => self.0.insert(pos, (var, exp)),
        }
    }

    pub fn factors(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent_of(&self, var: usize) -> u32 {
        self.0
            .binary_search_by_key(&var, |&(v, _)| v)
            .map(|pos| self.0[pos].1)
            .unwrap_or(0)
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 1.0;
        for &(v, e) in &self.0 {
            acc *= ipow(x[v], e);
        }
        acc
    }

    /// `d/dx_var` as `(multiplier, monomial)`; `None` when the variable is absent.
    pub fn derivative(&self, var: usize) -> Option<(f64, Monomial)> {
        let pos = self.0.binary_search_by_key(&var, |&(v, _)| v).ok()?;
        let e = self.0[pos].1;
        let mut out = self.clone();
        if e == 1 {
            out.0.remove(pos);
        } else {
            out.0[pos].1 = e - 1;
        }
        Some((f64::from(e), out))
    }
}

#[inline]
pub(crate) fn ipow(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        3 => x * x * x,
        _ => x.powi(e as i32),
    }
}

/// One term `coeff * forcing(t) * monomial(x)` feeding `dx[target]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub target: usize,
    pub coeff: f64,
    pub monomial: Monomial,
    #[serde(default, skip_serializing_if = "Forcing::is_none")]
    pub forcing: Forcing,
}

impl PolyTerm {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.target
            .cmp(&other.target)
            .then_with(|| self.monomial.cmp(&other.monomial))
            .then_with(|| self.forcing.total_cmp(&other.forcing))
    }
}

/// A polynomial vector field with fixed numeric coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySystem {
    dim: usize,
    terms: Vec<PolyTerm>,
}

impl PolySystem {
    /// Builds the system, merging like terms and dropping exact zeros.
    ///
    /// # Panics
    /// If a term references a variable or target `>= dim`.
    pub fn new(dim: usize, mut terms: Vec<PolyTerm>) -> Self {
        for t in &terms {
            assert!(t.target < dim, "term target {} out of range {dim}", t.target);
            assert!(
                t.monomial.factors().iter().all(|&(v, _)| v < dim),
                "term variable out of range {dim}"
            );
        }
        terms.sort_by(PolyTerm::key_cmp);
        let mut merged: Vec<PolyTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.key_cmp(&t) == Ordering::Equal => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        Self { dim, terms: merged }
    }

    pub fn terms(&self) -> &[PolyTerm] {
        &self.terms
    }

    /// Whether any term depends on time.
    pub fn is_autonomous(&self) -> bool {
        self.terms.iter().all(|t| t.forcing.is_none())
    }
}

impl VectorField for PolySystem {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        dx.iter_mut().for_each(|v| *v = 0.0);
        for term in &self.terms {
            dx[term.target] += term.coeff * term.forcing.value(t) * term.monomial.eval(x);
        }
    }

    fn jacobian(&self, t: f64, x: &[f64], jac: &mut [f64]) {
        let n = self.dim;
        jac.iter_mut().for_each(|v| *v = 0.0);
        for term in &self.terms {
            let scale = term.coeff * term.forcing.value(t);
            let factors = term.monomial.factors();
            for (pos, &(var, e)) in factors.iter().enumerate() {
                let mut d = scale * f64::from(e) * ipow(x[var], e - 1);
                for (other, &(v2, e2)) in factors.iter().enumerate() {
                    if other != pos {
                        d *= ipow(x[v2], e2);
                    }
                }
                jac[term.target * n + var] += d;
            }
        }
    }
}
