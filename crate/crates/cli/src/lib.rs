//! Experiment runner for the polychaos toolkit: configuration, studies and
//! the command implementations behind the `polychaos` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod studies;

use std::path::Path;

use thiserror::Error;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    /// A reference comparison found differences; the report has been printed.
    #[error("{0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Mismatch(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<polychaos::models::ModelError> for CliError {
    fn from(e: polychaos::models::ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<polychaos::integrate::IntegrateError> for CliError {
    fn from(e: polychaos::integrate::IntegrateError) -> Self {
        use polychaos::integrate::IntegrateError as E;
        match e {
            E::InvalidConfig(_) | E::NotSeparable(_) | E::NeedsCanonicalSplit | E::DimensionMismatch { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<polychaos::analysis::AnalysisError> for CliError {
    fn from(e: polychaos::analysis::AnalysisError) -> Self {
        use polychaos::analysis::AnalysisError as E;
        match e {
            E::Integrate(inner) => inner.into(),
            E::Sample { .. } => CliError::Numerical(e.to_string()),
            E::InvalidParameter(_) | E::GridMismatch(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<polychaos::harmonic::HarmonicError> for CliError {
    fn from(e: polychaos::harmonic::HarmonicError) -> Self {
        use polychaos::harmonic::HarmonicError as E;
        match e {
            E::Integrate(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<polychaos::hamiltonian::HamiltonianError> for CliError {
    fn from(e: polychaos::hamiltonian::HamiltonianError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<polychaos::golden::GoldenError> for CliError {
    fn from(e: polychaos::golden::GoldenError) -> Self {
        CliError::Validation(e.to_string())
    }
}
