//! One function per subcommand. Each writes its tables and a summary into
//! the configured output directory and returns a short report for stdout.

use std::collections::BTreeMap;

use polychaos::analysis::{largest_lyapunov, poincare, LyapunovOptions, MomentSeries};
use polychaos::galerkin::GalerkinSystem;
use polychaos::golden::check_against_golden;
use polychaos::hamiltonian::{check_hamiltonian_structure, max_abs_divergence, AverageHamiltonian, StructureCheck};
use polychaos::harmonic::{liouville_contrast, HarmonicSetup};
use polychaos::integrate::{integrate, integrate_symplectic, CanonicalSplit, Method, Output, Trajectory};
use polychaos::models::{make_model, ModelName, ModelSpec};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{prefixed, OutputDir};
use crate::studies::{self, TwoTimePoint, TwoTimeStudy};
use crate::CliError;

pub fn build_model(cfg: &ExperimentConfig) -> Result<ModelSpec, CliError> {
    let mut model = make_model(&cfg.model.name, &cfg.model.params)?;
    if let Some(ic) = &cfg.model.initial_condition {
        model = model.with_initial_condition(ic.clone())?;
    }
    if let Some(family) = cfg.expansion.family {
        if family != model.basis_kind() {
            return Err(CliError::Validation(format!(
                "basis {family:?} does not match the {:?} distribution of model {}",
                model.uncertainty.distribution, model.name
            )));
        }
    }
    Ok(model)
}

/// `t0, t0 + dt, ...` up to and including `t1`.
pub fn uniform_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| t0 + dt * i as f64).collect();
    if (t1 - v[n]).abs() > 1e-9 * dt {
        v.push(t1);
    } else {
        v[n] = t1;
    }
    v
}

#[derive(Debug, Serialize)]
struct ExpandResults {
    variables: Vec<String>,
    n_terms: usize,
    reference_check: Option<polychaos::golden::GoldenDiff>,
}

pub fn expand(cfg: &ExperimentConfig, check_reference: bool) -> Result<String, CliError> {
    let model = build_model(cfg)?;
    let sys = model.project(cfg.expansion.order, cfg.expansion.mode);
    let out = OutputDir::create(&cfg.output_dir)?;
    out.json("system.json", &sys.document())?;
    let diff = if check_reference { Some(check_against_golden(&model, &sys)?) } else { None };
    let mut report = format!(
        "{} order {} ({:?}): {} equations, {} terms\n",
        model.name,
        sys.order(),
        sys.mode(),
        sys.expanded_dim(),
        sys.terms().len()
    );
    if let Some(d) = &diff {
        report.push_str(&d.to_string());
    }
    let failed = diff.as_ref().is_some_and(|d| !d.is_match());
    out.summary(
        "expand",
        cfg,
        ExpandResults { variables: sys.variable_names().to_vec(), n_terms: sys.terms().len(), reference_check: diff },
    )?;
    if failed {
        return Err(CliError::Mismatch(report));
    }
    Ok(report)
}

fn integrate_system(
    model: &ModelSpec,
    sys: &GalerkinSystem,
    cfg: &ExperimentConfig,
    x0: &[f64],
) -> Result<Trajectory, CliError> {
    let ic = &cfg.integrator;
    let output = match cfg.analysis.sample_dt {
        Some(dt) => Output::Times(uniform_grid(ic.t0, ic.t1, dt)),
        None => Output::EveryStep,
    };
    match ic.method {
        Method::StormerVerlet => {
            let pairs = model.expanded_pairs(sys.order()).ok_or_else(|| {
                CliError::Validation(format!("model {} has no canonical pairing", model.name))
            })?;
            let split = CanonicalSplit::new(sys.symbolic(), &pairs)?;
            let every = cfg.analysis.sample_dt.map_or(1, |dt| (dt / ic.h).round().max(1.0) as usize);
            Ok(integrate_symplectic(sys, &split, ic.h, (ic.t0, ic.t1), x0, every)?)
        }
        _ => Ok(integrate(sys, ic, x0, &output)?),
    }
}

#[derive(Debug, Serialize)]
struct RunResults {
    variables: Vec<String>,
    n_rhs_evaluations: u64,
    n_steps: u64,
    n_rejected_steps: u64,
    terminal_time: f64,
    terminal_state: Vec<f64>,
    section_points: usize,
}

pub fn run(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let model = build_model(cfg)?;
    let r = cfg.expansion.order;
    let sys = model.project(r, cfg.expansion.mode);
    let x0 = model.expanded_initial_condition(r);
    let traj = integrate_system(&model, &sys, cfg, &x0)?;
    let out = OutputDir::create(&cfg.output_dir)?;
    let names = sys.variable_names().to_vec();

    let mut header = vec!["t".to_string()];
    header.extend(names.iter().cloned());
    out.numeric_csv(
        "trajectory.csv",
        &header,
        traj.times.iter().zip(&traj.states).map(|(t, x)| std::iter::once(*t).chain(x.iter().copied()).collect()),
    )?;

    let moments = MomentSeries::from_expansion(&traj, model.dim());
    let base = model.field.state_names().to_vec();
    let mut header = vec!["t".to_string()];
    header.extend(prefixed("mean", &base));
    header.extend(prefixed("std", &base));
    out.numeric_csv(
        "moments.csv",
        &header,
        (0..moments.times.len()).map(|j| {
            std::iter::once(moments.times[j])
                .chain(moments.mean[j].iter().copied())
                .chain(moments.std[j].iter().copied())
                .collect()
        }),
    )?;

    let mut section_points = 0;
    if cfg.analysis.n_points > 0 {
        let omega = model.forcing_omega().unwrap_or(1.0);
        let ic = polychaos::integrate::IntegratorConfig { method: Method::Rk45Adaptive, ..cfg.integrator.clone() };
        let sec = poincare(&sys, &ic, &x0, omega, cfg.analysis.phase, cfg.analysis.n_points)?;
        section_points = sec.points.len();
        let n = model.dim();
        for k in 0..=r {
            let mut header = vec!["n".to_string(), "t".to_string()];
            header.extend(names[k * n..(k + 1) * n].iter().cloned());
            out.numeric_csv(
                &format!("section_order_{k}.csv"),
                &header,
                sec.times.iter().zip(&sec.points).enumerate().map(|(i, (t, x))| {
                    [i as f64, *t].into_iter().chain(x[k * n..(k + 1) * n].iter().copied()).collect()
                }),
            )?;
        }
    }
    let last = traj.last_state().unwrap_or(&x0).to_vec();
    out.summary(
        "run",
        cfg,
        RunResults {
            variables: names,
            n_rhs_evaluations: traj.n_rhs_evaluations,
            n_steps: traj.n_steps,
            n_rejected_steps: traj.n_rejected_steps,
            terminal_time: *traj.times.last().unwrap_or(&cfg.integrator.t0),
            terminal_state: last.clone(),
            section_points,
        },
    )?;
    Ok(format!(
        "{} order {}: {} samples, {} evaluations, terminal state {:?}{}",
        model.name,
        r,
        traj.len(),
        traj.n_rhs_evaluations,
        last,
        if section_points > 0 { format!(", {section_points} section points") } else { String::new() }
    ))
}

#[derive(Debug, Serialize)]
struct TrackingResults {
    n_samples: usize,
    seed: u64,
    threshold: f64,
    watched: Vec<usize>,
    divergence_time: Option<f64>,
    max_mean_error: f64,
    max_std_error: f64,
}

#[derive(Debug, Serialize)]
struct TwoTimeRow {
    eps: f64,
    n_sections: usize,
    max_mean_error_averaged: f64,
    max_mean_error_full: f64,
    max_std_error_averaged: f64,
    max_std_error_full: f64,
    evaluations_full: u64,
    evaluations_averaged: u64,
}

fn max_of(rows: &[Vec<f64>], cols: &[usize]) -> f64 {
    rows.iter().flat_map(|r| cols.iter().map(move |&i| r[i])).fold(0.0, f64::max)
}

pub fn compare_mc(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let a = &cfg.analysis;
    let name: ModelName = cfg.model.name.parse()?;
    if matches!(name, ModelName::TwotimeFull | ModelName::TwotimeAveraged) {
        return twotime(cfg);
    }
    let model = build_model(cfg)?;
    let times = uniform_grid(cfg.integrator.t0, cfg.integrator.t1, a.sample_dt.unwrap_or(0.1));
    let tr = studies::tracking(
        &model,
        cfg.expansion.order,
        cfg.expansion.mode,
        &times,
        &cfg.integrator,
        a.n_samples,
        a.seed,
        a.threshold,
        &a.watch,
    )?;
    let out = OutputDir::create(&cfg.output_dir)?;
    let base = model.field.state_names().to_vec();
    let mut header = vec!["t".to_string()];
    for p in ["pc_mean", "pc_std", "mc_mean", "mc_std", "err_mean", "err_std"] {
        header.extend(prefixed(p, &base));
    }
    out.numeric_csv(
        "moment_error.csv",
        &header,
        (0..times.len()).map(|j| {
            let mut row = vec![times[j]];
            for part in [
                &tr.pc.mean[j],
                &tr.pc.std[j],
                &tr.mc.mean[j],
                &tr.mc.std[j],
                &tr.error.mean_error[j],
                &tr.error.std_error[j],
            ] {
                row.extend(part.iter().copied());
            }
            row
        }),
    )?;
    let res = TrackingResults {
        n_samples: a.n_samples,
        seed: a.seed,
        threshold: a.threshold,
        watched: a.watch.clone(),
        divergence_time: tr.error.divergence_time,
        max_mean_error: max_of(&tr.error.mean_error, &a.watch),
        max_std_error: max_of(&tr.error.std_error, &a.watch),
    };
    let report = format!(
        "{} order {} vs Monte Carlo ({} samples): max mean error {:.4}, divergence time {}",
        model.name,
        cfg.expansion.order,
        a.n_samples,
        res.max_mean_error,
        res.divergence_time.map_or("none".to_string(), |t| format!("{t}"))
    );
    out.summary("compare-mc", cfg, res)?;
    Ok(report)
}

fn twotime(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let a = &cfg.analysis;
    let study = TwoTimeStudy {
        params: cfg.model.params.clone(),
        order: cfg.expansion.order,
        mode: cfg.expansion.mode,
        slow_horizon: a.slow_horizon,
        n_samples: a.n_samples,
        seed: a.seed,
        config: cfg.integrator.clone(),
        watch: a.watch.clone(),
    };
    let out = OutputDir::create(&cfg.output_dir)?;
    let mut table = Vec::new();
    let mut series_rows: Vec<Vec<f64>> = Vec::new();
    for &eps in &a.eps_list {
        let p = study.run_point(eps)?;
        for (j, &t) in p.times.iter().enumerate() {
            let mut row = vec![eps, j as f64, t, eps * t];
            for part in [&p.mc.mean[j], &p.mc.std[j], &p.averaged.mean[j], &p.averaged.std[j], &p.full.mean[j], &p.full.std[j]]
            {
                row.extend(part.iter().copied());
            }
            row.extend(p.averaged_error.mean_error[j].iter().copied());
            row.extend(p.full_error.mean_error[j].iter().copied());
            series_rows.push(row);
        }
        table.push(TwoTimeRow {
            eps,
            n_sections: p.times.len(),
            max_mean_error_averaged: TwoTimePoint::max_mean_error(&p.averaged_error),
            max_mean_error_full: TwoTimePoint::max_mean_error(&p.full_error),
            max_std_error_averaged: max_of(&p.averaged_error.std_error, &a.watch),
            max_std_error_full: max_of(&p.full_error.std_error, &a.watch),
            evaluations_full: p.full_evaluations,
            evaluations_averaged: p.averaged_evaluations,
        });
    }
    let base = ["q".to_string(), "p".to_string()];
    let mut header: Vec<String> = ["eps", "n", "t", "chi"].iter().map(|s| s.to_string()).collect();
    for p in ["mc_mean", "mc_std", "avg_mean", "avg_std", "full_mean", "full_std", "err_avg_mean", "err_full_mean"] {
        header.extend(prefixed(p, &base));
    }
    out.numeric_csv("twotime_series.csv", &header, series_rows)?;
    let header: Vec<String> = [
        "eps",
        "n_sections",
        "max_mean_error_averaged",
        "max_mean_error_full",
        "max_std_error_averaged",
        "max_std_error_full",
        "evaluations_full",
        "evaluations_averaged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    out.csv(
        "twotime_table.csv",
        &header,
        table.iter().map(|r| {
            vec![
                r.eps.to_string(),
                r.n_sections.to_string(),
                r.max_mean_error_averaged.to_string(),
                r.max_mean_error_full.to_string(),
                r.max_std_error_averaged.to_string(),
                r.max_std_error_full.to_string(),
                r.evaluations_full.to_string(),
                r.evaluations_averaged.to_string(),
            ]
        }),
    )?;
    let mut report = String::from("eps        avg err    full err   full evals  avg evals\n");
    for r in &table {
        report.push_str(&format!(
            "{:<10} {:<10.4} {:<10.4} {:<11} {}\n",
            r.eps, r.max_mean_error_averaged, r.max_mean_error_full, r.evaluations_full, r.evaluations_averaged
        ));
    }
    out.summary("compare-mc", cfg, table)?;
    Ok(report)
}

/// Exponents reported in the literature for the built-in chaotic models,
/// kept for comparison only.
pub fn published_exponents(name: ModelName) -> BTreeMap<&'static str, f64> {
    match name {
        ModelName::DuffingForced => BTreeMap::from([("nominal", 0.93), ("pc", 0.73)]),
        ModelName::DuffingUncertainIc => BTreeMap::from([("pc", 0.85)]),
        _ => BTreeMap::new(),
    }
}

#[derive(Debug, Serialize)]
struct LyapunovResults {
    nominal: f64,
    pc: f64,
    horizon: f64,
    renorm_dt: f64,
    transient: f64,
    published_reference: BTreeMap<&'static str, f64>,
}

pub fn lyapunov(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let model = build_model(cfg)?;
    let a = &cfg.analysis;
    let opts = LyapunovOptions { horizon: a.horizon, renorm_dt: a.renorm_dt, transient: a.transient, initial_tangent: None };
    let (nominal_field, nominal_x0) = model.realization(0.0);
    let nominal = largest_lyapunov(&nominal_field, &cfg.integrator, &nominal_x0, &opts)?;
    let sys = model.project(cfg.expansion.order, cfg.expansion.mode);
    let pc = largest_lyapunov(&sys, &cfg.integrator, &model.expanded_initial_condition(cfg.expansion.order), &opts)?;
    let out = OutputDir::create(&cfg.output_dir)?;
    let header: Vec<String> = ["system", "t", "estimate"].iter().map(|s| s.to_string()).collect();
    let rows = [("nominal", &nominal), ("pc", &pc)]
        .into_iter()
        .flat_map(|(label, est)| est.series.iter().map(move |(t, e)| vec![label.to_string(), t.to_string(), e.to_string()]));
    out.csv("lyapunov_series.csv", &header, rows)?;
    let res = LyapunovResults {
        nominal: nominal.exponent,
        pc: pc.exponent,
        horizon: nominal.horizon,
        renorm_dt: nominal.renorm_dt,
        transient: nominal.transient,
        published_reference: published_exponents(model.name),
    };
    let report = format!(
        "{}: largest exponent nominal {:.4}, order-{} expansion {:.4} (horizon {}, transient {})",
        model.name, res.nominal, cfg.expansion.order, res.pc, res.horizon, res.transient
    );
    out.summary("lyapunov", cfg, res)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct StructureRow {
    order: usize,
    residual: f64,
    max_abs_divergence: f64,
}

pub fn theorem1(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let model = build_model(cfg)?;
    let ham = model
        .hamiltonian
        .clone()
        .ok_or_else(|| CliError::Validation(format!("model {} is not Hamiltonian", model.name)))?;
    let a = &cfg.analysis;
    let check = StructureCheck { samples: a.structure_samples, box_half_width: 2.0, fd_step: a.fd_step, seed: a.seed };
    let mut rows = Vec::new();
    for r in 1..=cfg.expansion.order.max(1) {
        let sys = model.project(r, cfg.expansion.mode);
        let ah = AverageHamiltonian::new(ham.clone(), model.family(r), model.dim())?;
        let residual = check_hamiltonian_structure(&ah, &sys, check)?;
        let max_abs_divergence = max_abs_divergence(&sys, check);
        rows.push(StructureRow { order: r, residual, max_abs_divergence });
    }
    let out = OutputDir::create(&cfg.output_dir)?;
    let header: Vec<String> = ["order", "residual", "max_abs_divergence"].iter().map(|s| s.to_string()).collect();
    out.csv(
        "theorem1.csv",
        &header,
        rows.iter().map(|r| vec![r.order.to_string(), r.residual.to_string(), r.max_abs_divergence.to_string()]),
    )?;
    let mut report = format!("{}: gradient residual of the average Hamiltonian\n", model.name);
    for r in &rows {
        report.push_str(&format!(
            "  order {}: residual {:.3e}, max |divergence| {:.3e}\n",
            r.order, r.residual, r.max_abs_divergence
        ));
    }
    out.summary("theorem1", cfg, rows)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct HarmonicResults {
    t_star: Option<f64>,
    max_det_deviation: f64,
    initial_exact_norm: f64,
    final_exact_norm: f64,
    final_pc_norm: f64,
    max_mismatch: f64,
}

pub fn harmonic(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let model = build_model(cfg)?;
    if model.name != ModelName::HarmonicUncertainFreq {
        return Err(CliError::Validation("the harmonic command needs model harmonic_uncertain_freq".into()));
    }
    let setup = HarmonicSetup::new(model.params["omega0"], model.params["alpha"], cfg.expansion.order)?;
    let times = uniform_grid(0.0, cfg.integrator.t1, cfg.analysis.sample_dt.unwrap_or(0.5));
    let rep = liouville_contrast(&setup, &times, &cfg.integrator)?;
    let out = OutputDir::create(&cfg.output_dir)?;
    let r = setup.order;
    let mut header: Vec<String> =
        ["t", "det", "exact_norm", "pc_norm", "mismatch"].iter().map(|s| s.to_string()).collect();
    for src in ["exact", "pc"] {
        for k in 0..=r {
            header.push(format!("{src}_Q{k}"));
            header.push(format!("{src}_P{k}"));
        }
    }
    out.numeric_csv(
        "harmonic.csv",
        &header,
        (0..times.len()).map(|j| {
            let mut row = vec![times[j], rep.det[j], rep.exact_norm[j], rep.pc_norm[j], rep.mismatch[j]];
            row.extend(rep.exact[j].iter().copied());
            row.extend(rep.pc[j].iter().copied());
            row
        }),
    )?;
    let res = HarmonicResults {
        t_star: rep.t_star,
        max_det_deviation: rep.max_det_deviation(),
        initial_exact_norm: rep.exact_norm[0],
        final_exact_norm: *rep.exact_norm.last().expect("grid is nonempty"),
        final_pc_norm: *rep.pc_norm.last().expect("grid is nonempty"),
        max_mismatch: rep.mismatch.iter().copied().fold(0.0, f64::max),
    };
    let report = format!(
        "harmonic order {r}: max |det - 1| {:.2e}, exact norm {:.4} -> {:.4}, Galerkin norm {:.4}, t* {}",
        res.max_det_deviation,
        res.initial_exact_norm,
        res.final_exact_norm,
        res.final_pc_norm,
        res.t_star.map_or("none".to_string(), |t| format!("{t}"))
    );
    out.summary("harmonic", cfg, res)?;
    Ok(report)
}
