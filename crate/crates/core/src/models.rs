//! Built-in oscillator models with their default parameters, initial
//! conditions and uncertainty descriptors.
//!
//! Every uncertain quantity enters affinely, `p = p0 + spread * lambda`, with
//! `lambda` standardized (unit Gaussian or uniform on `[-1, 1]`). Terms of
//! the vector field carry powers of that standardized `lambda`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{BasisFamily, BasisKind};
use crate::field::{Forcing, Monomial, PolySystem};
use crate::galerkin::{self, GalerkinError, GalerkinSystem, PolynomialVectorField, ProjectionMode, Term};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model `{0}` (expected one of: {names})", names = ModelName::ALL.map(|m| m.as_str()).join(", "))]
    UnknownModel(String),
    #[error("model `{model}` has no parameter `{param}`")]
    UnknownParameter { model: ModelName, param: String },
    #[error("parameter `{param}` must be {requirement}, got {value}")]
    InvalidParameter { param: String, requirement: &'static str, value: f64 },
    #[error("initial condition has length {got}, model state has dimension {expected}")]
    InitialConditionLength { expected: usize, got: usize },
    #[error(transparent)]
    Field(#[from] GalerkinError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    DuffingUnforced,
    DuffingForced,
    DuffingUncertainIc,
    HarmonicUncertainFreq,
    TwotimeFull,
    TwotimeAveraged,
}

impl ModelName {
    pub const ALL: [ModelName; 6] = [
        ModelName::DuffingUnforced,
        ModelName::DuffingForced,
        ModelName::DuffingUncertainIc,
        ModelName::HarmonicUncertainFreq,
        ModelName::TwotimeFull,
        ModelName::TwotimeAveraged,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::DuffingUnforced => "duffing_unforced",
            ModelName::DuffingForced => "duffing_forced",
            ModelName::DuffingUncertainIc => "duffing_uncertain_ic",
            ModelName::HarmonicUncertainFreq => "harmonic_uncertain_freq",
            ModelName::TwotimeFull => "twotime_full",
            ModelName::TwotimeAveraged => "twotime_averaged",
        }
    }

    /// Default parameter values.
    pub fn defaults(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            ModelName::DuffingUnforced => &[("lambda0", -1.0), ("sigma", 0.1)],
            ModelName::DuffingForced => &[
                ("delta", 0.2),
                ("gamma", 0.3),
                ("omega", 1.0),
                ("lambda0", -1.0),
                ("sigma", 0.1),
            ],
            ModelName::DuffingUncertainIc => &[
                ("delta", 0.2),
                ("gamma", 0.3),
                ("omega", 1.0),
                ("lambda", -1.0),
                ("sigma", 0.1),
            ],
            ModelName::HarmonicUncertainFreq => &[("omega0", 1.0), ("alpha", 0.25)],
            ModelName::TwotimeFull => &[
                ("eps", 0.1),
                ("delta", 0.0),
                ("beta", 1.0),
                ("gamma0", 1.0),
                ("sigma", 0.1),
                ("omega", 1.0),
            ],
            ModelName::TwotimeAveraged => &[("delta", 0.0), ("beta", 1.0), ("gamma0", 1.0), ("sigma", 0.1)],
        };
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    Uniform,
}

impl Distribution {
    pub fn basis_kind(self) -> BasisKind {
        match self {
            Distribution::Gaussian => BasisKind::HermiteGaussian,
            Distribution::Uniform => BasisKind::LegendreUniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UncertainTarget {
    Parameter { name: String },
    InitialCondition { coordinate: usize },
}

/// `value = mean + spread * lambda`; `spread` is the standard deviation for
/// a Gaussian and the half-width for a uniform variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    pub target: UncertainTarget,
    pub distribution: Distribution,
    pub mean: f64,
    pub spread: f64,
}

/// Polynomial Hamiltonian `H(q, p; lambda)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    /// `(coeff, lambda power, monomial in the base state)`.
    pub terms: Vec<(f64, u32, Monomial)>,
    /// Canonical `(q index, p index)` pairs.
    pub pairs: Vec<(usize, usize)>,
}

impl HamiltonianSpec {
    pub fn eval(&self, x: &[f64], lambda: f64) -> f64 {
        self.terms
            .iter()
            .map(|(c, lp, m)| c * lambda.powi(*lp as i32) * m.eval(x))
            .sum()
    }

    /// Hamilton's equations `q' = dH/dp`, `p' = -dH/dq` as field terms.
    pub fn equations_of_motion(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for &(qi, pi) in &self.pairs {
            for (c, lp, m) in &self.terms {
                if let Some((e, d)) = m.derivative(pi) {
                    out.push(Term { target: qi, coeff: c * e, lambda_power: *lp, monomial: d, forcing: Forcing::None });
                }
                if let Some((e, d)) = m.derivative(qi) {
                    out.push(Term { target: pi, coeff: -c * e, lambda_power: *lp, monomial: d, forcing: Forcing::None });
                }
            }
        }
        out
    }

    /// Every term depends on positions only or on momenta only.
    pub fn is_separable(&self) -> bool {
        let is_q = |v: usize| self.pairs.iter().any(|&(q, _)| q == v);
        self.terms.iter().all(|(_, _, m)| {
            let f = m.factors();
            f.iter().all(|&(v, _)| is_q(v)) || f.iter().all(|&(v, _)| !is_q(v))
        })
    }
}

/// Sorts and merges like terms; used for symbolic equality checks.
pub fn canonical_terms(terms: &[Term]) -> Vec<Term> {
    let mut v = terms.to_vec();
    v.sort_by(|a, b| {
        a.target
            .cmp(&b.target)
            .then(a.lambda_power.cmp(&b.lambda_power))
            .then_with(|| a.monomial.cmp(&b.monomial))
            .then_with(|| a.forcing.total_cmp(&b.forcing))
    });
    let mut out: Vec<Term> = Vec::with_capacity(v.len());
    for t in v {
        match out.last_mut() {
            Some(last)
                if last.target == t.target
                    && last.lambda_power == t.lambda_power
                    && last.monomial == t.monomial
                    && last.forcing == t.forcing =>
            {
                last.coeff += t.coeff
            }
            _ => out.push(t),
        }
    }
    out.retain(|t| t.coeff != 0.0);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: ModelName,
    pub field: PolynomialVectorField,
    pub hamiltonian: Option<HamiltonianSpec>,
    pub params: BTreeMap<String, f64>,
    pub initial_condition: Vec<f64>,
    pub uncertainty: Uncertainty,
}

/// Builds a model with its defaults, applying `overrides` first.
pub fn make_model(name: &str, overrides: &BTreeMap<String, f64>) -> Result<ModelSpec, ModelError> {
    let name: ModelName = name.parse()?;
    let mut params = name.defaults();
    for (k, v) in overrides {
        match params.get_mut(k) {
            Some(slot) => *slot = *v,
            None => return Err(ModelError::UnknownParameter { model: name, param: k.clone() }),
        }
        if !v.is_finite() {
            return Err(ModelError::InvalidParameter { param: k.clone(), requirement: "finite", value: *v });
        }
    }
    build(name, params)
}

fn nonnegative(params: &BTreeMap<String, f64>, key: &str) -> Result<f64, ModelError> {
    let v = params[key];
    if v < 0.0 {
        return Err(ModelError::InvalidParameter { param: key.to_string(), requirement: "nonnegative", value: v });
    }
    Ok(v)
}

fn build(name: ModelName, params: BTreeMap<String, f64>) -> Result<ModelSpec, ModelError> {
    let p = |k: &str| params[k];
    let gaussian_param = |param: &str, mean: f64, spread: f64| Uncertainty {
        target: UncertainTarget::Parameter { name: param.to_string() },
        distribution: Distribution::Gaussian,
        mean,
        spread,
    };
    let (q, pm) = (0usize, 1usize);

    let spec = match name {
        ModelName::DuffingUnforced => {
            let (l0, s) = (p("lambda0"), nonnegative(&params, "sigma")?);
            let ham = HamiltonianSpec {
                terms: vec![
                    (0.5, 0, Monomial::from_pairs([(pm, 2)])),
                    (0.5 * l0, 0, Monomial::from_pairs([(q, 2)])),
                    (0.5 * s, 1, Monomial::from_pairs([(q, 2)])),
                    (0.25, 0, Monomial::from_pairs([(q, 4)])),
                ],
                pairs: vec![(q, pm)],
            };
            let field = PolynomialVectorField::new(vec!["q", "p"], "eta", canonical_terms(&ham.equations_of_motion()))?;
            ModelSpec {
                name,
                field,
                hamiltonian: Some(ham),
                initial_condition: vec![1.0, 0.0],
                uncertainty: gaussian_param("lambda", l0, s),
                params,
            }
        }
        ModelName::DuffingForced => {
            let (d, g, w, l0, s) = (p("delta"), p("gamma"), p("omega"), p("lambda0"), nonnegative(&params, "sigma")?);
            let field = PolynomialVectorField::new(
                vec!["q", "p"],
                "eta",
                vec![
                    Term::new(q, 1.0).state(pm, 1),
                    Term::new(pm, -d).state(pm, 1),
                    Term::new(pm, -l0).state(q, 1),
                    Term::new(pm, -s).lambda(1).state(q, 1),
                    Term::new(pm, -1.0).state(q, 3),
                    Term::new(pm, g).forcing(Forcing::Cos { omega: w }),
                ],
            )?;
            ModelSpec {
                name,
                field,
                hamiltonian: None,
                initial_condition: vec![1.0, 0.0],
                uncertainty: gaussian_param("lambda", l0, s),
                params,
            }
        }
        ModelName::DuffingUncertainIc => {
            let (d, g, w, l, s) = (p("delta"), p("gamma"), p("omega"), p("lambda"), nonnegative(&params, "sigma")?);
            let field = PolynomialVectorField::new(
                vec!["q", "p"],
                "eta",
                vec![
                    Term::new(q, 1.0).state(pm, 1),
                    Term::new(pm, -d).state(pm, 1),
                    Term::new(pm, -l).state(q, 1),
                    Term::new(pm, -1.0).state(q, 3),
                    Term::new(pm, g).forcing(Forcing::Cos { omega: w }),
                ],
            )?;
            ModelSpec {
                name,
                field,
                hamiltonian: None,
                initial_condition: vec![1.0, 0.0],
                uncertainty: Uncertainty {
                    target: UncertainTarget::InitialCondition { coordinate: q },
                    distribution: Distribution::Gaussian,
                    mean: 1.0,
                    spread: s,
                },
                params,
            }
        }
        ModelName::HarmonicUncertainFreq => {
            let (w0, a) = (p("omega0"), nonnegative(&params, "alpha")?);
            // omega^2 = w0^2 + 2 w0 a lambda + a^2 lambda^2
            let ham = HamiltonianSpec {
                terms: vec![
                    (0.5, 0, Monomial::from_pairs([(pm, 2)])),
                    (0.5 * w0 * w0, 0, Monomial::from_pairs([(q, 2)])),
                    (w0 * a, 1, Monomial::from_pairs([(q, 2)])),
                    (0.5 * a * a, 2, Monomial::from_pairs([(q, 2)])),
                ],
                pairs: vec![(q, pm)],
            };
            let field = PolynomialVectorField::new(vec!["q", "p"], "lambda", canonical_terms(&ham.equations_of_motion()))?;
            ModelSpec {
                name,
                field,
                hamiltonian: Some(ham),
                initial_condition: vec![1.0, 0.0],
                uncertainty: Uncertainty {
                    target: UncertainTarget::Parameter { name: "omega".to_string() },
                    distribution: Distribution::Uniform,
                    mean: w0,
                    spread: a,
                },
                params,
            }
        }
        ModelName::TwotimeFull => {
            let (e, d, b, g0, s, w) =
                (p("eps"), p("delta"), p("beta"), p("gamma0"), nonnegative(&params, "sigma")?, p("omega"));
            let (x, y) = (0usize, 1usize);
            let cos = Forcing::Cos { omega: w };
            let field = PolynomialVectorField::new(
                vec!["x", "y"],
                "eta",
                vec![
                    Term::new(x, 1.0).state(y, 1),
                    Term::new(y, -1.0).state(x, 1),
                    Term::new(y, -e * d).state(y, 1),
                    Term::new(y, -e * b).state(x, 3),
                    Term::new(y, e * g0).forcing(cos),
                    Term::new(y, e * s).lambda(1).forcing(cos),
                ],
            )?
            .with_coefficient_symbols(vec!["x", "y"])?;
            ModelSpec {
                name,
                field,
                hamiltonian: None,
                initial_condition: vec![2.0, 0.0],
                uncertainty: gaussian_param("gamma", g0, s),
                params,
            }
        }
        ModelName::TwotimeAveraged => {
            let (d, b, g0, s) = (p("delta"), p("beta"), p("gamma0"), nonnegative(&params, "sigma")?);
            let (aa, bb) = (0usize, 1usize);
            // 2A' = -d A + 3/4 b B (A^2 + B^2),  2B' = -d B - 3/4 b A (A^2 + B^2) + gamma
            let k = 0.375 * b;
            let field = PolynomialVectorField::new(
                vec!["A", "B"],
                "eta",
                vec![
                    Term::new(aa, -0.5 * d).state(aa, 1),
                    Term::new(aa, k).state(bb, 1).state(aa, 2),
                    Term::new(aa, k).state(bb, 3),
                    Term::new(bb, -0.5 * d).state(bb, 1),
                    Term::new(bb, -k).state(aa, 3),
                    Term::new(bb, -k).state(aa, 1).state(bb, 2),
                    Term::new(bb, 0.5 * g0),
                    Term::new(bb, 0.5 * s).lambda(1),
                ],
            )?
            .with_coefficient_symbols(vec!["a", "b"])?;
            ModelSpec {
                name,
                field,
                hamiltonian: None,
                initial_condition: vec![2.0, 0.0],
                uncertainty: gaussian_param("gamma", g0, s),
                params,
            }
        }
    };
    Ok(spec)
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn basis_kind(&self) -> BasisKind {
        self.uncertainty.distribution.basis_kind()
    }

    pub fn family(&self, order: usize) -> BasisFamily {
        BasisFamily::new(self.basis_kind(), order)
    }

    pub fn project(&self, order: usize, mode: ProjectionMode) -> GalerkinSystem {
        galerkin::project(&self.field, self.family(order), mode)
    }

    /// Angular frequency of the harmonic forcing, if any.
    pub fn forcing_omega(&self) -> Option<f64> {
        self.field.terms().iter().find_map(|t| t.forcing.omega())
    }

    pub fn with_initial_condition(mut self, ic: Vec<f64>) -> Result<Self, ModelError> {
        if ic.len() != self.dim() {
            return Err(ModelError::InitialConditionLength { expected: self.dim(), got: ic.len() });
        }
        if let UncertainTarget::InitialCondition { coordinate } = self.uncertainty.target {
            self.uncertainty.mean = ic[coordinate];
        }
        self.initial_condition = ic;
        Ok(self)
    }

    /// gPC coefficients of the (possibly uncertain) initial condition.
    pub fn expanded_initial_condition(&self, order: usize) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n * (order + 1)];
        x[..n].copy_from_slice(&self.initial_condition);
        if let UncertainTarget::InitialCondition { coordinate } = self.uncertainty.target {
            x[coordinate] = self.uncertainty.mean;
            if order >= 1 {
                // E[lambda psi_1] is 1 for Hermite and 1/sqrt(3) for Legendre.
                let proj = self
                    .family(1)
                    .expectation_moment(&[1], 1)
                    .expect("order 1 is in range");
                x[n + coordinate] = self.uncertainty.spread * proj;
            }
        }
        x
    }

    /// The deterministic field and initial state for one realization of the
    /// standardized variable.
    pub fn realization(&self, lambda: f64) -> (PolySystem, Vec<f64>) {
        let mut ic = self.initial_condition.clone();
        if let UncertainTarget::InitialCondition { coordinate } = self.uncertainty.target {
            ic[coordinate] = self.uncertainty.mean + self.uncertainty.spread * lambda;
        }
        (self.field.at_parameter(lambda), ic)
    }

    /// Expanded canonical pairs `(Q_{i,s}, P_{i,s})` for order `order`.
    pub fn expanded_pairs(&self, order: usize) -> Option<Vec<(usize, usize)>> {
        let n = self.dim();
        let ham = self.hamiltonian.as_ref()?;
        Some(
            (0..=order)
                .flat_map(|s| ham.pairs.iter().map(move |&(q, p)| (s * n + q, s * n + p)))
                .collect(),
        )
    }
}
