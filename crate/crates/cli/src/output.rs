//! CSV tables and versioned JSON summaries inside a run directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Summary<'a, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub results: R,
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes a numeric table; values use the shortest round-trip form.
    pub fn numeric_csv<I>(&self, name: &str, header: &[String], rows: I) -> Result<PathBuf, CliError>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        self.csv(name, header, rows.into_iter().map(|r| r.iter().map(|v| v.to_string()).collect()))
    }

    pub fn csv<I>(&self, name: &str, header: &[String], rows: I) -> Result<PathBuf, CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let io = |e: csv::Error| CliError::Io { path: path.display().to_string(), source: e.into() };
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).expect("summaries serialize");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn summary<R: Serialize>(&self, command: &str, config: &ExperimentConfig, results: R) -> Result<PathBuf, CliError> {
        self.json(
            "summary.json",
            &Summary { schema_version: SUMMARY_SCHEMA_VERSION, command, config, results },
        )
    }
}

/// `prefix_name` for each name.
pub fn prefixed(prefix: &str, names: &[String]) -> Vec<String> {
    names.iter().map(|n| format!("{prefix}_{n}")).collect()
}
