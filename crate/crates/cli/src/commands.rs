use std::f64::consts::TAU;

use nvcool::hilbert::SpaceLayout;
use nvcool::liouville::{evolve_with, Engine, EvolveOptions, IntegratorSpec, Stationarity, Trajectory};
use nvcool::meanfield::{
    asymptotic_nb, evolve_mean_field, heating_for_target, optimal_gamma, quadratic_coeffs, stationary_nb, stationary_ns,
    MeanFieldState,
};
use nvcool::model::{
    build_collapse_terms, build_h0, build_h1_full, initial_state, number_observables, phonon_charge,
    zero_point_fluctuation, SystemParams,
};
use nvcool::par::{self, Exec};
use nvcool::reduced::{evolve_reduced_with, reduced_initial_state, ReducedParams};

use crate::config::{Integrator, Mode, RunSpec, Sweep, TruncationRule};
use crate::error::{config, CliError, CliResult};
use crate::table::{fmt, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A finished command: its table and any violated checks.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub table: Table,
    pub failures: Vec<String>,
}

impl From<Table> for Report {
    fn from(table: Table) -> Self {
        Self { table, failures: vec![] }
    }
}

pub fn run(spec: &RunSpec, exec: Exec) -> CliResult<Report> {
    match spec.mode {
        Mode::AnalyticSweep => cmd_analytic_sweep(spec, exec).map(Report::from),
        Mode::GammaSweep => cmd_gamma_sweep(spec, exec).map(Report::from),
        Mode::EvolveFull | Mode::EvolveReduced | Mode::EvolveMeanfield => cmd_evolve(spec, exec).map(Report::from),
        Mode::Compare => cmd_compare(spec, exec),
        Mode::DeriveParams => cmd_derive_params(spec).map(Report::from),
    }
}

pub fn reduced(spec: &RunSpec, p: &SystemParams) -> ReducedParams {
    ReducedParams { ns_prime_override: spec.ns_prime, ..ReducedParams::from(p) }
}

fn header(spec: &RunSpec) -> Vec<String> {
    let mut h = vec![format!("nvcool {VERSION}"), format!("mode: {}", spec.mode.as_str())];
    h.push(if spec.renormalized { "units: renormalized".into() } else { "units: SI, angular rates in rad/s".into() });
    for name in SystemParams::NAMES {
        h.push(format!("param {name} = {}", fmt(spec.params.get(name).expect("known name"))));
    }
    if let Some(ns) = spec.ns_prime {
        h.push(format!("param ns_prime = {}", fmt(ns)));
    }
    for s in &spec.sweep {
        let vals: Vec<String> = s.values.iter().map(|v| fmt(*v)).collect();
        h.push(format!("sweep {} = {}", s.key, vals.join(";")));
    }
    if spec.mode.truncates() {
        h.push(match spec.truncation {
            TruncationRule::Fixed { dim_a, dim_b } => format!("truncation dim_a = {dim_a}, dim_b = {dim_b}"),
            TruncationRule::OccupationTable => "truncation = occupation table".into(),
        });
    }
    if let Some(i) = &spec.integrator {
        h.push(format!(
            "integrator dt = {}, t_final = {}, record_stride = {}, stationarity_window = {}, stationarity_tol = {}",
            fmt(i.spec.dt),
            fmt(i.spec.t_final),
            i.spec.record_stride,
            fmt(i.window),
            fmt(i.tol)
        ));
    }
    for w in &spec.warnings {
        h.push(format!("warning: {w}"));
    }
    h
}

fn single_sweep<'a>(spec: &'a RunSpec, required: Option<&str>) -> CliResult<&'a Sweep> {
    let mode = spec.mode.as_str();
    match (spec.sweep.as_slice(), required) {
        ([s], Some(name)) if s.name != name => Err(config(format!("{mode}: sweep parameter must be `{name}`, got `{}`", s.key))),
        ([s], _) => Ok(s),
        _ => Err(config(format!("{mode} needs exactly one sweep entry"))),
    }
}

fn integrator(spec: &RunSpec) -> CliResult<Integrator> {
    spec.integrator.ok_or_else(|| config(format!("{} needs an `integrator` section", spec.mode.as_str())))
}

/// Stationary ⟨n_b⟩, ⟨n_s⟩ and the quadratic's coefficients along one sweep.
pub fn cmd_analytic_sweep(spec: &RunSpec, exec: Exec) -> CliResult<Table> {
    let sweep = single_sweep(spec, None)?;
    let points = spec.points();
    let rows = par::map(exec, &points, |p| -> nvcool::Result<[f64; 5]> {
        let rp = reduced(spec, p);
        let nb = stationary_nb(&rp)?;
        let q = quadratic_coeffs(&rp);
        Ok([nb, stationary_ns(&rp, nb), q.a, q.b, q.c])
    });
    let mut table = Table::new(&[sweep.key.as_str(), "nb_stationary", "ns_stationary", "A", "B", "C"]);
    table.header = header(spec);
    let mut nbs = Vec::with_capacity(rows.len());
    for (x, row) in sweep.values.iter().zip(rows) {
        let row = row?;
        nbs.push(row[0]);
        let mut values = vec![*x];
        values.extend(row);
        table.push(&values);
    }
    if sweep.name == "nbar_a" {
        let crossing = nbs.windows(2).position(|w| (w[0] - 1.0) * (w[1] - 1.0) <= 0.0 && w[0] != w[1]);
        table.footer.push(match crossing {
            Some(k) => {
                let (lo, hi) = (sweep.values[k] * sweep.scale, sweep.values[k + 1] * sweep.scale);
                match heating_for_target(&reduced(spec, &spec.params), 1.0, (lo.min(hi), lo.max(hi)))? {
                    Some(x) => format!("nb_equals_1_at {} = {}", sweep.key, fmt(x / sweep.scale)),
                    None => "nb_equals_1_at: not bracketed".into(),
                }
            }
            None => "nb_equals_1_at: not bracketed".into(),
        });
    }
    Ok(table)
}

/// Stationary ⟨n_b⟩ against Γ with the large-heating-bath asymptote and the
/// optimum over the grid's range.
pub fn cmd_gamma_sweep(spec: &RunSpec, exec: Exec) -> CliResult<Table> {
    let sweep = single_sweep(spec, Some("Gamma"))?;
    let points = spec.points();
    let rows = par::map(exec, &points, |p| -> nvcool::Result<[f64; 2]> {
        Ok([stationary_nb(&reduced(spec, p))?, asymptotic_nb(p.nbar_b, p.gamma_b, p.gamma_spin)?])
    });
    let mut table = Table::new(&[sweep.key.as_str(), "nb_stationary", "nb_asymptotic"]);
    table.header = header(spec);
    let mut best = (f64::NAN, f64::INFINITY);
    for (x, row) in sweep.values.iter().zip(rows) {
        let [nb, asym] = row?;
        if nb < best.1 {
            best = (*x, nb);
        }
        table.push(&[*x, nb, asym]);
    }
    let lo = sweep.resolved().fold(f64::INFINITY, f64::min);
    let hi = sweep.resolved().fold(f64::NEG_INFINITY, f64::max);
    if lo < hi {
        let opt = optimal_gamma(&reduced(spec, &spec.params), (lo, hi))?;
        table.footer.push(format!("optimum {} = {}, nb = {}", sweep.key, fmt(opt.gamma / sweep.scale), fmt(opt.n_b)));
        if let Some(w) = opt.warning {
            table.footer.push(format!("optimum warning: {w}"));
        }
    } else {
        table.footer.push(format!("optimum {} = {}, nb = {}", sweep.key, fmt(best.0), fmt(best.1)));
    }
    Ok(table)
}

/// Outcome of one full-model propagation.
#[derive(Clone, Debug)]
pub struct FullRun {
    pub trajectory: Trajectory,
    pub min_eigenvalue: f64,
    pub dims: (usize, usize),
}

impl FullRun {
    pub fn final_nb(&self) -> f64 {
        self.trajectory.final_value("n_b").expect("n_b is recorded")
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.trajectory.asymmetry.iter().copied().fold(0.0, f64::max)
    }
}

/// Propagate the full spin ⊗ a ⊗ b model from thermal modes and the spin
/// ground state, using the conserved phonon number to block the state.
pub fn run_full_model(p: &SystemParams, dims: (usize, usize), integ: &Integrator, exec: Exec) -> nvcool::Result<FullRun> {
    let layout = SpaceLayout::full(dims.0, dims.1)?;
    let h = build_h0(p, &layout)?.add(&build_h1_full(p, &layout)?)?;
    let terms = build_collapse_terms(p, &layout)?;
    let rho0 = initial_state(p, &layout)?;
    let options = EvolveOptions {
        exec,
        engine: Engine::Charge(phonon_charge(&layout)),
        stationarity: Some(Stationarity { observable: "n_b".into(), window: integ.window, tol: integ.tol }),
    };
    let ev = evolve_with(&rho0, &h, &terms, &integ.spec, &number_observables(&layout)?, &options)?;
    Ok(FullRun { min_eigenvalue: ev.min_eigenvalue(), trajectory: ev.trajectory, dims })
}

fn trajectory_table(spec: &RunSpec, traj: &Trajectory, columns: &[&str], with_trace: bool) -> CliResult<Table> {
    let mut cols = vec!["t"];
    cols.extend_from_slice(columns);
    if with_trace {
        cols.push("trace_error");
    }
    let mut table = Table::new(&cols);
    table.header = header(spec);
    let series = columns.iter().map(|c| traj.series(c)).collect::<nvcool::Result<Vec<_>>>()?;
    for (k, t) in traj.times.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(series.iter().map(|s| s[k]));
        if with_trace {
            row.push(traj.trace_error[k]);
        }
        table.push(&row);
    }
    table.footer.push(match traj.stationary_at {
        Some(t) => format!("stationary_at = {}", fmt(t)),
        None => "stationary_at = none".into(),
    });
    for (c, s) in columns.iter().zip(&series) {
        table.footer.push(format!("final {c} = {}", fmt(*s.last().expect("at least one record"))));
    }
    Ok(table)
}

pub fn cmd_evolve(spec: &RunSpec, exec: Exec) -> CliResult<Table> {
    let integ = integrator(spec)?;
    let p = spec.params;
    match spec.mode {
        Mode::EvolveFull => {
            let run = run_full_model(&p, spec.truncation.dims(&p), &integ, exec)?;
            let mut table = trajectory_table(spec, &run.trajectory, &["n_b", "n_a", "n_s"], true)?;
            table.footer.push(format!("min_eigenvalue = {}", fmt(run.min_eigenvalue)));
            table.footer.push(format!("max_trace_error = {}", fmt(run.trajectory.max_trace_error())));
            table.footer.push(format!("max_asymmetry = {}", fmt(run.max_asymmetry())));
            Ok(table)
        }
        Mode::EvolveReduced => {
            let rp = reduced(spec, &p);
            let (_, dim_b) = spec.truncation.dims(&p);
            let rho0 = reduced_initial_state(&rp, dim_b)?;
            let ev = evolve_reduced_with(&rho0, &rp, &integ.spec, exec)?;
            let mut traj = ev.trajectory.clone();
            traj.stationary_at = traj.stationary_since("n_b", integ.window, integ.tol)?;
            let mut table = trajectory_table(spec, &traj, &["n_b", "n_s"], true)?;
            table.footer.push(format!("min_eigenvalue = {}", fmt(ev.min_eigenvalue())));
            table.footer.push(format!("max_trace_error = {}", fmt(traj.max_trace_error())));
            Ok(table)
        }
        Mode::EvolveMeanfield => {
            let rp = reduced(spec, &p);
            let traj = mean_field_trajectory(&rp, &integ)?;
            let mut table = trajectory_table(spec, &traj, &["n_b", "n_s"], false)?;
            table.footer.push(format!("nb_stationary = {}", fmt(stationary_nb(&rp)?)));
            Ok(table)
        }
        other => Err(config(format!("evolve cannot run mode {}", other.as_str()))),
    }
}

/// Mean-field moments from `n_s = 0`, `n_b = n̄_b`, as a trajectory.
pub fn mean_field_trajectory(rp: &ReducedParams, integ: &Integrator) -> nvcool::Result<Trajectory> {
    let series = evolve_mean_field(MeanFieldState { n_s: 0.0, n_b: rp.nbar_b }, rp, &integ.spec)?;
    let mut traj = Trajectory::new(vec!["n_b".into(), "n_s".into()]);
    for (t, s) in series {
        traj.push(t, vec![s.n_b, s.n_s], 0.0, 0.0);
    }
    traj.stationary_at = traj.stationary_since("n_b", integ.window, integ.tol)?;
    Ok(traj)
}

/// One compare point.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparePoint {
    pub nbar_a: f64,
    pub gamma: f64,
    pub numeric: f64,
    pub analytic: f64,
    pub stationary_at: Option<f64>,
    pub min_eigenvalue: f64,
    pub max_trace_error: f64,
    pub max_asymmetry: f64,
}

/// Full-model final ⟨n_b⟩ against the mean-field value over the (n̄_a, Γ)
/// grid. Points run concurrently; rows keep grid order.
pub fn compare_points(spec: &RunSpec, exec: Exec) -> CliResult<Vec<ComparePoint>> {
    for name in ["nbar_a", "Gamma"] {
        if spec.sweep_entry(name).is_none() {
            return Err(config(format!("compare needs a sweep entry for `{name}`")));
        }
    }
    let integ = integrator(spec)?;
    let points = spec.points();
    let results = par::map(exec, &points, |p| -> nvcool::Result<ComparePoint> {
        let run = run_full_model(p, spec.truncation.dims(p), &integ, Exec::Serial)?;
        Ok(ComparePoint {
            nbar_a: p.nbar_a,
            gamma: p.gamma_spin,
            numeric: run.final_nb(),
            analytic: stationary_nb(&reduced(spec, p))?,
            stationary_at: run.trajectory.stationary_at,
            min_eigenvalue: run.min_eigenvalue,
            max_trace_error: run.trajectory.max_trace_error(),
            max_asymmetry: run.max_asymmetry(),
        })
    });
    results.into_iter().map(|r| r.map_err(CliError::from)).collect()
}

pub fn cmd_compare(spec: &RunSpec, exec: Exec) -> CliResult<Report> {
    let points = compare_points(spec, exec)?;
    let gamma_scale = spec.sweep_entry("Gamma").map_or(1.0, |s| s.scale);
    let gamma_key = spec.sweep_entry("Gamma").map_or("Gamma", |s| s.key.as_str());
    let mut table = Table::new(&[
        "nbar_a",
        gamma_key,
        "nb_numeric",
        "nb_analytic",
        "abs_diff",
        "rel_diff",
        "stationary_at",
        "min_eigenvalue",
    ]);
    table.header = header(spec);
    let mut failures = Vec::new();
    let check = spec.check.unwrap_or(crate::config::CheckSpec {
        max_abs_diff: None,
        numeric_exceeds_analytic: None,
        require_stationary: None,
    });
    for pt in &points {
        let diff = pt.numeric - pt.analytic;
        let g = pt.gamma / gamma_scale;
        table.push(&[
            pt.nbar_a,
            g,
            pt.numeric,
            pt.analytic,
            diff.abs(),
            diff.abs() / pt.analytic.abs(),
            pt.stationary_at.unwrap_or(f64::NAN),
            pt.min_eigenvalue,
        ]);
        let at = format!("nbar_a = {}, {gamma_key} = {}", pt.nbar_a, g);
        if let Some(tol) = check.max_abs_diff {
            if !(diff.abs() <= tol) {
                failures.push(format!("{at}: |numeric − analytic| = {:.4} exceeds {tol}", diff.abs()));
            }
        }
        if check.numeric_exceeds_analytic == Some(true) && !(diff > 0.0) {
            failures.push(format!("{at}: numeric {:.4} not above analytic {:.4}", pt.numeric, pt.analytic));
        }
        if check.require_stationary == Some(true) && pt.stationary_at.is_none() {
            failures.push(format!("{at}: run did not reach stationarity"));
        }
    }
    let max_trace = points.iter().map(|p| p.max_trace_error).fold(0.0, f64::max);
    table.footer.push(format!("max_trace_error = {}", fmt(max_trace)));
    table.footer.push(format!("checks = {}", if failures.is_empty() { "pass".to_string() } else { format!("{} failed", failures.len()) }));
    Ok(Report { table, failures })
}

/// Model parameters derived from laboratory quantities, in SI, per 2π and
/// renormalized (γ_b = 1) form.
pub fn cmd_derive_params(spec: &RunSpec) -> CliResult<Table> {
    let input = spec.physical.ok_or_else(|| config("derive-params needs a `physical` section"))?;
    let p = spec.params;
    let ph = input.physical;
    let mut table = Table::new(&["quantity", "si", "over_2pi", "renormalized"]);
    table.header = header(spec);
    table.header.push(format!("physical mass_a = {} kg, mass_b = {} kg", fmt(ph.mass_a), fmt(ph.mass_b)));
    table.header.push(format!("physical omega_a = {} rad/s, omega_b = {} rad/s", fmt(ph.omega_a), fmt(ph.omega_b)));
    table.header.push(format!(
        "physical G2 = {} T/m^2, temperature = {} K, quality_factor = {}",
        fmt(ph.g2),
        fmt(ph.temperature),
        fmt(ph.quality_factor)
    ));
    for name in SystemParams::NAMES {
        let v = p.get(name).expect("known name");
        if SystemParams::is_frequency(name) {
            table.push_labelled(name, &[v, v / TAU, v / p.gamma_b]);
        } else {
            table.push_labelled(name, &[v, v, v]);
        }
    }
    let x_a = zero_point_fluctuation(ph.mass_a, ph.omega_a)?;
    let x_b = zero_point_fluctuation(ph.mass_b, ph.omega_b)?;
    table.footer.push(format!("x_a = {} m", fmt(x_a)));
    table.footer.push(format!("x_b = {} m", fmt(x_b)));
    Ok(table)
}

/// Integrator settings for the default schedule at `dt`, `t_final`.
pub fn integrator_settings(dt: f64, t_final: f64, record_stride: usize) -> nvcool::Result<Integrator> {
    Ok(Integrator { spec: IntegratorSpec::new(dt, t_final, record_stride)?, window: 0.1 * t_final, tol: 1e-3 })
}
