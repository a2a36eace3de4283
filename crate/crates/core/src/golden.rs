//! Reference term lists for the built-in first-order systems, written with
//! symbolic parameters, and a term-level comparison against projections.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Forcing, Monomial};
use crate::galerkin::{GalerkinSystem, ProjectionMode};
use crate::models::{ModelName, ModelSpec};

const FIXTURES: [(&str, &str); 5] = [
    ("duffing_unforced", include_str!("../golden/duffing_unforced.json")),
    ("duffing_forced", include_str!("../golden/duffing_forced.json")),
    ("duffing_uncertain_ic", include_str!("../golden/duffing_uncertain_ic.json")),
    ("twotime_full", include_str!("../golden/twotime_full.json")),
    ("twotime_averaged", include_str!("../golden/twotime_averaged.json")),
];

/// Coefficient tolerance of the comparison.
pub const GOLDEN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GoldenError {
    #[error("no reference term list for model {0}")]
    NoFixture(String),
    #[error("malformed reference for {model}: {message}")]
    Malformed { model: String, message: String },
    #[error("reference is for order {expected}, system has order {got}")]
    OrderMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenTerm {
    pub target: String,
    pub coeff: f64,
    /// Model parameters multiplying `coeff`.
    #[serde(default)]
    pub params: Vec<String>,
    /// Space-separated factors such as `Q0^2 Q1`, or `1`.
    pub monomial: String,
    /// `cos` or `sin` at the model's `omega`.
    #[serde(default)]
    pub forcing: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenSystem {
    pub model: String,
    pub description: String,
    pub order: usize,
    /// Projection mode that reproduces the list.
    pub mode: ProjectionMode,
    pub variables: Vec<String>,
    pub terms: Vec<GoldenTerm>,
}

pub fn fixture_models() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|(m, _)| *m)
}

pub fn golden_for(model: ModelName) -> Result<GoldenSystem, GoldenError> {
    let (_, text) = FIXTURES
        .iter()
        .find(|(m, _)| *m == model.as_str())
        .ok_or_else(|| GoldenError::NoFixture(model.to_string()))?;
    serde_json::from_str(text).map_err(|e| GoldenError::Malformed { model: model.to_string(), message: e.to_string() })
}

/// `Forcing` ordered by `total_cmp`, for use in map keys.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ForcingKey(Forcing);

impl Eq for ForcingKey {}

impl PartialOrd for ForcingKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ForcingKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

type Key = (usize, Monomial, ForcingKey);

fn parse_monomial(text: &str, names: &[String]) -> Result<Monomial, String> {
    if text.trim() == "1" {
        return Ok(Monomial::one());
    }
    let mut m = Monomial::one();
    for factor in text.split_whitespace() {
        let (name, exp) = match factor.split_once('^') {
            Some((n, e)) => (n, e.parse::<u32>().map_err(|_| format!("bad exponent in {factor}"))?),
            None => (factor, 1),
        };
        let var = names.iter().position(|v| v == name).ok_or_else(|| format!("unknown variable {name}"))?;
        m.mul_var(var, exp);
    }
    Ok(m)
}

impl GoldenSystem {
    /// Numeric terms for the given parameter values; zero-valued terms drop out.
    fn evaluate(&self, params: &BTreeMap<String, f64>) -> Result<BTreeMap<Key, f64>, GoldenError> {
        let bad = |message: String| GoldenError::Malformed { model: self.model.clone(), message };
        let mut out: BTreeMap<Key, f64> = BTreeMap::new();
        for term in &self.terms {
            let target = self
                .variables
                .iter()
                .position(|v| *v == term.target)
                .ok_or_else(|| bad(format!("unknown target {}", term.target)))?;
            let monomial = parse_monomial(&term.monomial, &self.variables).map_err(bad)?;
            let mut coeff = term.coeff;
            for p in &term.params {
                coeff *= params.get(p).ok_or_else(|| bad(format!("unknown parameter {p}")))?;
            }
            let forcing = match term.forcing.as_deref() {
                None => Forcing::None,
                Some(kind) => {
                    let omega = *params.get("omega").ok_or_else(|| bad("forcing needs omega".into()))?;
                    match kind {
                        "cos" => Forcing::Cos { omega },
                        "sin" => Forcing::Sin { omega },
                        other => return Err(bad(format!("unknown forcing {other}"))),
                    }
                }
            };
            *out.entry((target, monomial, ForcingKey(forcing))).or_insert(0.0) += coeff;
        }
        out.retain(|_, c| *c != 0.0);
        Ok(out)
    }
}

/// Term-level differences between a projection and its reference.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GoldenDiff {
    pub model: String,
    pub matched: usize,
    /// Reference terms absent from the system.
    pub missing: Vec<String>,
    /// System terms absent from the reference.
    pub extra: Vec<String>,
    /// Terms present in both with different coefficients.
    pub mismatched: Vec<String>,
    /// Largest coefficient difference among matched terms.
    pub max_abs_error: f64,
}

impl GoldenDiff {
    pub fn is_match(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty() && self.mismatched.is_empty()
    }
}

impl fmt::Display for GoldenDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_match() {
            return write!(f, "{}: PASS ({} terms, max error {:.1e})", self.model, self.matched, self.max_abs_error);
        }
        writeln!(f, "{}: FAIL", self.model)?;
        for m in &self.missing {
            writeln!(f, "  missing   {m}")?;
        }
        for m in &self.extra {
            writeln!(f, "  extra     {m}")?;
        }
        for m in &self.mismatched {
            writeln!(f, "  mismatch  {m}")?;
        }
        Ok(())
    }
}

fn describe(key: &Key, coeff: f64, names: &[String]) -> String {
    let forcing = match key.2.0 {
        Forcing::None => String::new(),
        other => format!(" * {other}"),
    };
    format!(
        "d{}/dt: {coeff:+} * {}{forcing}",
        names[key.0],
        crate::galerkin::render_monomial(key.1.factors(), names)
    )
}

/// Compares `system`, projected from `model`, with the model's reference.
pub fn check_against_golden(model: &ModelSpec, system: &GalerkinSystem) -> Result<GoldenDiff, GoldenError> {
    let golden = golden_for(model.name)?;
    if golden.order != system.order() {
        return Err(GoldenError::OrderMismatch { expected: golden.order, got: system.order() });
    }
    if golden.variables != system.variable_names() {
        return Err(GoldenError::Malformed {
            model: golden.model.clone(),
            message: format!("variables {:?} differ from {:?}", golden.variables, system.variable_names()),
        });
    }
    let expected = golden.evaluate(&model.params)?;
    let mut actual: BTreeMap<Key, f64> = BTreeMap::new();
    for t in system.terms() {
        *actual.entry((t.target, t.monomial.clone(), ForcingKey(t.forcing))).or_insert(0.0) += t.coeff;
    }
    let names = system.variable_names();
    let mut diff = GoldenDiff { model: golden.model.clone(), ..Default::default() };
    for (key, &want) in &expected {
        match actual.get(key) {
            None => diff.missing.push(describe(key, want, names)),
            Some(&got) => {
                let err = (got - want).abs();
                if err > GOLDEN_TOLERANCE {
                    diff.mismatched.push(format!("{} (system has {got:+})", describe(key, want, names)));
                } else {
                    diff.matched += 1;
                    diff.max_abs_error = diff.max_abs_error.max(err);
                }
            }
        }
    }
    for (key, &got) in &actual {
        if !expected.contains_key(key) {
            diff.extra.push(describe(key, got, names));
        }
    }
    Ok(diff)
}
