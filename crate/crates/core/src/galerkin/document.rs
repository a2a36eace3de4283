use serde::{Deserialize, Serialize};

use super::{GalerkinSystem, ProjectionMode};
use crate::basis::BasisKind;
use crate::field::Forcing;

pub const DOCUMENT_SCHEMA_VERSION: u32 = 1;

/// JSON form of an expanded Galerkin system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDocument {
    pub schema_version: u32,
    pub family: BasisKind,
    pub order: usize,
    pub mode: ProjectionMode,
    pub base_dim: usize,
    pub expanded_dim: usize,
    pub variables: Vec<String>,
    pub terms: Vec<TermRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub target: usize,
    pub target_name: String,
    pub coeff: f64,
    /// `[variable index, power]` pairs.
    pub exponents: Vec<(usize, u32)>,
    /// Human-readable rendering of `exponents`, e.g. `Q0^2 Q1`.
    pub monomial: String,
    #[serde(default)]
    pub forcing: Forcing,
}

impl SystemDocument {
    pub(super) fn from_system(sys: &GalerkinSystem) -> Self {
        let names = sys.variable_names();
        let terms = sys
            .terms()
            .iter()
            .map(|t| TermRecord {
                target: t.target,
                target_name: names[t.target].clone(),
                coeff: t.coeff,
                exponents: t.monomial.factors().to_vec(),
                monomial: render_monomial(t.monomial.factors(), names),
                forcing: t.forcing,
            })
            .collect();
        Self {
            schema_version: DOCUMENT_SCHEMA_VERSION,
            family: sys.family().kind,
            order: sys.order(),
            mode: sys.mode(),
            base_dim: sys.base_dim(),
            expanded_dim: sys.expanded_dim(),
            variables: names.to_vec(),
            terms,
        }
    }
}

pub(crate) fn render_monomial(factors: &[(usize, u32)], names: &[String]) -> String {
    if factors.is_empty() {
        return "1".to_string();
    }
    factors
        .iter()
        .map(|&(v, e)| if e == 1 { names[v].clone() } else { format!("{}^{e}", names[v]) })
        .collect::<Vec<_>>()
        .join(" ")
}
