use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polychaos_cli::commands;
use polychaos_cli::config::ExperimentConfig;
use polychaos_cli::CliError;
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "polychaos", version, about = "Intrusive polynomial chaos experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the expanded Galerkin system as JSON.
    Expand {
        #[command(flatten)]
        common: Common,
        /// Compare against the bundled reference expansion; exits 2 on mismatch.
        #[arg(long = "check-paper")]
        check_reference: bool,
    },
    /// Integrate the expanded system and write trajectory, moments and sections.
    Run(Common),
    /// Compare gPC moments with Monte Carlo; runs the scale-separation study
    /// for the two-time models.
    CompareMc(Common),
    /// Largest Lyapunov exponent of the nominal and expanded systems.
    Lyapunov(Common),
    /// Check that the expanded conservative system is Hamiltonian.
    Theorem1(Common),
    /// Exact versus Galerkin coefficients of the uncertain-frequency oscillator.
    Harmonic(Common),
    /// Print the effective configuration as TOML.
    ShowConfig(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; flags below override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Model name; same as `--model`.
    #[arg(value_name = "MODEL", conflicts_with = "model")]
    model_name: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    /// full or linearized_fluctuations.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    /// Model parameter override, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// Comma-separated initial state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    ic: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rtol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    atol: Option<f64>,
    /// rk45_adaptive, rk4_fixed or stormer_verlet.
    #[arg(long)]
    method: Option<String>,
    /// Step of the fixed-step methods.
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    sample_dt: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    horizon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
}

fn parse_name<T: DeserializeOwned>(what: &str, s: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Validation(format!("unknown {what} '{s}'")))
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        self.resolve_or(None)
    }

    /// As [`Common::resolve`], with `model` used when neither a config file
    /// nor `--model` names one.
    fn resolve_or(&self, model: Option<&str>) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let mut cfg = ExperimentConfig::default();
                if let Some(m) = model {
                    cfg.model.name = m.to_string();
                }
                cfg
            }
        };
        if let Some(m) = self.model.as_ref().or(self.model_name.as_ref()) {
            cfg.model.name = m.clone();
        }
        if let Some(r) = self.order {
            cfg.expansion.order = r;
        }
        if let Some(m) = &self.mode {
            cfg.expansion.mode = parse_name("mode", m)?;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        for kv in &self.params {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("--param expects NAME=VALUE, got '{kv}'")))?;
            let v: f64 =
                v.trim().parse().map_err(|_| CliError::Validation(format!("--param {k}: '{v}' is not a number")))?;
            cfg.model.params.insert(k.trim().to_string(), v);
        }
        if let Some(ic) = &self.ic {
            cfg.model.initial_condition = Some(ic.clone());
        }
        let ic = &mut cfg.integrator;
        if let Some(v) = self.t0 {
            ic.t0 = v;
        }
        if let Some(v) = self.t1 {
            ic.t1 = v;
        }
        if let Some(v) = self.rtol {
            ic.rtol = v;
        }
        if let Some(v) = self.atol {
            ic.atol = v;
        }
        if let Some(v) = self.h {
            ic.h = v;
        }
        if let Some(m) = &self.method {
            ic.method = parse_name("method", m)?;
        }
        let a = &mut cfg.analysis;
        if let Some(v) = self.seed {
            a.seed = v;
        }
        if let Some(v) = self.n_samples {
            a.n_samples = v;
        }
        if let Some(v) = self.sample_dt {
            a.sample_dt = Some(v);
        }
        if let Some(v) = self.n_points {
            a.n_points = v;
        }
        if let Some(v) = self.horizon {
            a.horizon = v;
        }
        if let Some(v) = self.threshold {
            a.threshold = v;
        }
        if let Some(v) = &self.eps_list {
            a.eps_list = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dispatch(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Expand { common, check_reference } => commands::expand(&common.resolve()?, check_reference),
        Command::Run(c) => commands::run(&c.resolve()?),
        Command::CompareMc(c) => commands::compare_mc(&c.resolve()?),
        Command::Lyapunov(c) => commands::lyapunov(&c.resolve()?),
        Command::Theorem1(c) => commands::theorem1(&c.resolve_or(Some("duffing_unforced"))?),
        Command::Harmonic(c) => commands::harmonic(&c.resolve_or(Some("harmonic_uncertain_freq"))?),
        Command::ShowConfig(c) => Ok(c.resolve()?.to_toml()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(report) => {
            println!("{}", report.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
