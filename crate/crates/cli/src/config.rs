//! Experiment configuration: one TOML document with a table per concern.
//! Unknown keys are rejected so that typos cannot silently fall back to
//! defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use polychaos::basis::BasisKind;
use polychaos::galerkin::ProjectionMode;
use polychaos::integrate::IntegratorConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form label echoed into summaries.
    pub experiment: String,
    pub output_dir: PathBuf,
    pub model: ModelSection,
    pub expansion: ExpansionSection,
    pub integrator: IntegratorConfig,
    pub analysis: AnalysisSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "unnamed".into(),
            output_dir: PathBuf::from("out"),
            model: ModelSection::default(),
            expansion: ExpansionSection::default(),
            integrator: IntegratorConfig::span(0.0, 50.0),
            analysis: AnalysisSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    /// Parameter values replacing the model defaults.
    pub params: BTreeMap<String, f64>,
    /// Replaces the model's default initial state.
    pub initial_condition: Option<Vec<f64>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { name: "duffing_forced".into(), params: BTreeMap::new(), initial_condition: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSection {
    pub order: usize,
    pub mode: ProjectionMode,
    /// Must agree with the distribution of the model's uncertain quantity
    /// when given.
    pub family: Option<BasisKind>,
}

impl Default for ExpansionSection {
    fn default() -> Self {
        Self { order: 1, mode: ProjectionMode::Full, family: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub n_samples: usize,
    pub seed: u64,
    /// Spacing of the uniform output grid; every accepted step when absent.
    pub sample_dt: Option<f64>,
    /// Poincaré phase and number of section points; no section when zero.
    pub phase: f64,
    pub n_points: usize,
    /// Mean-error threshold that defines the divergence time.
    pub threshold: f64,
    /// Coordinates whose mean error is compared with the threshold.
    pub watch: Vec<usize>,
    pub horizon: f64,
    pub renorm_dt: f64,
    pub transient: Option<f64>,
    pub eps_list: Vec<f64>,
    /// Slow-time horizon of the two-time study.
    pub slow_horizon: f64,
    pub fd_step: f64,
    pub structure_samples: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            seed: 1,
            sample_dt: None,
            phase: 0.0,
            n_points: 0,
            threshold: 0.5,
            watch: vec![0],
            horizon: 2e4,
            renorm_dt: 1.0,
            transient: None,
            eps_list: vec![1e-1, 1e-2, 1e-3],
            slow_horizon: 20.0,
            fd_step: 1e-5,
            structure_samples: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that do not depend on the command.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        let a = &self.analysis;
        if let Some(dt) = a.sample_dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad(format!("sample_dt must be positive, got {dt}"));
            }
        }
        if !(a.threshold > 0.0) {
            return bad(format!("threshold must be positive, got {}", a.threshold));
        }
        if a.eps_list.iter().any(|e| !(*e > 0.0)) {
            return bad("eps_list entries must be positive".into());
        }
        if !(a.fd_step > 0.0) {
            return bad(format!("fd_step must be positive, got {}", a.fd_step));
        }
        self.integrator.validate().map_err(|e| CliError::Validation(e.to_string()))
    }
}
