//! JSON run configuration.
//!
//! Frequencies are written either as `<name>_over_2pi` in Hz (converted to
//! angular rates on load) or, with `"renormalized": true`, as bare names in
//! units of γ_b. One file uses exactly one style.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use nvcool::liouville::IntegratorSpec;
use nvcool::model::{validate_regime, PhysicalParams, SystemParams};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{config, CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    AnalyticSweep,
    GammaSweep,
    EvolveFull,
    EvolveReduced,
    EvolveMeanfield,
    Compare,
    DeriveParams,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::AnalyticSweep => "analytic-sweep",
            Mode::GammaSweep => "gamma-sweep",
            Mode::EvolveFull => "evolve-full",
            Mode::EvolveReduced => "evolve-reduced",
            Mode::EvolveMeanfield => "evolve-meanfield",
            Mode::Compare => "compare",
            Mode::DeriveParams => "derive-params",
        }
    }

    /// Modes that propagate a truncated density matrix.
    pub fn truncates(self) -> bool {
        matches!(self, Mode::EvolveFull | Mode::EvolveReduced | Mode::Compare)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    /// Dims 2×25×10 and, unless configured, dt = 2e-4 up to t = 3.
    Ci,
    /// Truncation table by occupation.
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub dim_a: Option<usize>,
    pub dim_b: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruncationRule {
    Fixed { dim_a: usize, dim_b: usize },
    /// n̄ = 1, 2, 3, 4 → 15, 27, 40, 60 levels, linear in between and 15 n̄
    /// beyond; at least 15 levels.
    OccupationTable,
}

impl TruncationRule {
    pub fn dims(&self, p: &SystemParams) -> (usize, usize) {
        match *self {
            TruncationRule::Fixed { dim_a, dim_b } => (dim_a, dim_b),
            TruncationRule::OccupationTable => (table_dim(p.nbar_a), table_dim(p.nbar_b)),
        }
    }
}

fn table_dim(nbar: f64) -> usize {
    const TABLE: [(f64, f64); 4] = [(1.0, 15.0), (2.0, 27.0), (3.0, 40.0), (4.0, 60.0)];
    let levels = if nbar <= 1.0 {
        15.0
    } else if nbar >= 4.0 {
        15.0 * nbar
    } else {
        let k = TABLE.windows(2).position(|w| nbar <= w[1].0).unwrap_or(2);
        let ((x0, y0), (x1, y1)) = (TABLE[k], TABLE[k + 1]);
        y0 + (nbar - x0) * (y1 - y0) / (x1 - x0)
    };
    levels.ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Largest allowed |numeric − analytic| per row.
    pub max_abs_diff: Option<f64>,
    /// Require numeric > analytic on every row.
    pub numeric_exceeds_analytic: Option<bool>,
    /// Require every numeric run to pass the stationarity test.
    pub require_stationary: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrator {
    pub spec: IntegratorSpec,
    pub window: f64,
    pub tol: f64,
}

/// One swept parameter. `values` are in config units; `scale` converts them
/// to model units.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub name: &'static str,
    pub key: String,
    pub values: Vec<f64>,
    pub scale: f64,
}

impl Sweep {
    pub fn resolved(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|v| v * self.scale)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalInput {
    pub physical: PhysicalParams,
    pub gamma_spin: f64,
    pub nbar_a: Option<f64>,
}

/// Validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    pub renormalized: bool,
    /// Model parameters in angular units; derived ones for `derive-params`.
    pub params: SystemParams,
    pub ns_prime: Option<f64>,
    pub physical: Option<PhysicalInput>,
    pub sweep: Vec<Sweep>,
    pub truncation: TruncationRule,
    pub integrator: Option<Integrator>,
    pub output: Option<PathBuf>,
    pub check: Option<CheckSpec>,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Mode,
    #[serde(default)]
    renormalized: bool,
    params: Option<BTreeMap<String, Value>>,
    physical: Option<RawPhysical>,
    #[serde(default)]
    sweep: Vec<RawSweep>,
    truncation: Option<Truncation>,
    integrator: Option<RawIntegrator>,
    output: Option<RawOutput>,
    check: Option<CheckSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysical {
    mass_a: f64,
    mass_b: f64,
    omega_a_over_2pi: f64,
    omega_b_over_2pi: f64,
    #[serde(rename = "G2")]
    g2: f64,
    temperature: f64,
    quality_factor: f64,
    #[serde(rename = "Gamma_over_2pi", default)]
    gamma_spin_over_2pi: f64,
    nbar_a: Option<f64>,
}

#[derive(Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Spacing {
    Linear,
    Log,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: String,
    values: Option<Vec<f64>>,
    start: Option<f64>,
    stop: Option<f64>,
    count: Option<usize>,
    spacing: Option<Spacing>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    dt: f64,
    t_final: f64,
    #[serde(default = "one")]
    record_stride: usize,
    stationarity_window: Option<f64>,
    stationarity_tol: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
}

pub fn load_config(path: &Path) -> CliResult<RunSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    RunSpec::from_json(&text)
}

/// Map a params/sweep key to its model name and the factor to model units.
fn resolve_key(key: &str, renormalized: bool) -> CliResult<(&'static str, f64)> {
    let known = |base: &str| SystemParams::NAMES.iter().copied().find(|n| *n == base);
    if let Some(base) = key.strip_suffix("_over_2pi") {
        let name = known(base)
            .filter(|n| SystemParams::is_frequency(n))
            .ok_or_else(|| config(format!("unknown key `{key}`")))?;
        if renormalized {
            return Err(config(format!("`{key}`: _over_2pi keys cannot be combined with renormalized: true")));
        }
        return Ok((name, TAU));
    }
    let name = known(key).ok_or_else(|| config(format!("unknown key `{key}`")))?;
    if SystemParams::is_frequency(name) && !renormalized {
        return Err(config(format!("`{key}` must be written as `{key}_over_2pi` (Hz) unless renormalized is true")));
    }
    Ok((name, 1.0))
}

fn number(key: &str, v: &Value) -> CliResult<f64> {
    v.as_f64().ok_or_else(|| config(format!("`{key}` must be a number, got {v}")))
}

impl RunSpec {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| config(e.to_string()))?;
        let renormalized = raw.renormalized;

        let (params, ns_prime, physical) = match (raw.mode, raw.params, raw.physical) {
            (Mode::DeriveParams, None, Some(ph)) => {
                if renormalized {
                    return Err(config("derive-params takes SI inputs; drop `renormalized`"));
                }
                let input = PhysicalInput {
                    physical: PhysicalParams {
                        mass_a: ph.mass_a,
                        mass_b: ph.mass_b,
                        omega_a: TAU * ph.omega_a_over_2pi,
                        omega_b: TAU * ph.omega_b_over_2pi,
                        g2: ph.g2,
                        temperature: ph.temperature,
                        quality_factor: ph.quality_factor,
                    },
                    gamma_spin: TAU * ph.gamma_spin_over_2pi,
                    nbar_a: ph.nbar_a,
                };
                let params = input
                    .physical
                    .to_system(input.gamma_spin, input.nbar_a)
                    .map_err(|e| config(format!("physical: {e}")))?;
                (params, None, Some(input))
            }
            (Mode::DeriveParams, _, _) => return Err(config("derive-params needs a `physical` section and no `params`")),
            (_, _, Some(_)) => return Err(config("`physical` is only valid for derive-params")),
            (_, None, None) => return Err(config("missing field `params`")),
            (_, Some(map), None) => {
                let (p, ns) = parse_params(&map, renormalized)?;
                (p, ns, None)
            }
        };

        let sweep = raw.sweep.into_iter().map(|s| parse_sweep(s, renormalized)).collect::<CliResult<Vec<_>>>()?;
        let truncation = match raw.truncation {
            None => TruncationRule::OccupationTable,
            Some(Truncation { dim_a, dim_b }) => {
                let dim_a = match (raw.mode, dim_a) {
                    (Mode::EvolveReduced | Mode::EvolveMeanfield, None) => 1,
                    (_, Some(d)) => d,
                    (_, None) => return Err(config("truncation: missing field `dim_a`")),
                };
                if dim_a == 0 || dim_b < 2 {
                    return Err(config("truncation: `dim_a` must be ≥ 1 and `dim_b` ≥ 2"));
                }
                TruncationRule::Fixed { dim_a, dim_b }
            }
        };
        let integrator = raw.integrator.map(parse_integrator).transpose()?;
        if raw.check.is_some() && raw.mode != Mode::Compare {
            return Err(config("`check` is only valid for compare"));
        }
        let mut spec = RunSpec {
            mode: raw.mode,
            renormalized,
            params,
            ns_prime,
            physical,
            sweep,
            truncation,
            integrator,
            output: raw.output.and_then(|o| o.path),
            check: raw.check,
            warnings: vec![],
        };
        spec.validate_points()?;
        spec.refresh_warnings();
        Ok(spec)
    }

    /// Override truncation (and, for `ci`, a missing integrator section).
    pub fn apply_profile(&mut self, profile: Profile) {
        match profile {
            Profile::Ci => {
                self.truncation = TruncationRule::Fixed { dim_a: 25, dim_b: 10 };
                if self.integrator.is_none() {
                    let spec = IntegratorSpec { dt: 2e-4, t_final: 3.0, record_stride: 50 };
                    self.integrator = Some(Integrator { spec, window: 0.3, tol: 1e-3 });
                }
            }
            Profile::Paper => self.truncation = TruncationRule::OccupationTable,
        }
        self.refresh_warnings();
    }

    /// Every parameter set the run will visit: the base set, or one per
    /// point of the sweep grid (Cartesian product, first entry outermost).
    pub fn points(&self) -> Vec<SystemParams> {
        let mut out = vec![self.params];
        for s in &self.sweep {
            out = out
                .iter()
                .flat_map(|p| {
                    s.resolved().map(move |v| {
                        let mut q = *p;
                        q.set(s.name, v).expect("sweep names are validated");
                        q
                    })
                })
                .collect();
        }
        out
    }

    pub fn sweep_entry(&self, name: &str) -> Option<&Sweep> {
        self.sweep.iter().find(|s| s.name == name)
    }

    fn validate_points(&self) -> CliResult<()> {
        for p in self.points() {
            p.validate().map_err(|e| config(format!("params: {e}")))?;
            if self.mode != Mode::EvolveFull && self.mode != Mode::DeriveParams {
                p.check_resonance().map_err(|e| config(format!("params: {e}")))?;
            }
        }
        Ok(())
    }

    fn refresh_warnings(&mut self) {
        let mut out: Vec<String> = validate_regime(&self.params).iter().map(|w| w.to_string()).collect();
        if self.mode.truncates() {
            for p in self.points() {
                let (dim_a, dim_b) = self.truncation.dims(&p);
                let need = |n: f64| (4.0 * n + 5.0).ceil() as usize;
                if self.mode != Mode::EvolveReduced && dim_a < need(p.nbar_a) {
                    out.push(format!("truncation dim_a = {dim_a} is below 4·nbar_a + 5 = {}", need(p.nbar_a)));
                }
                if dim_b < need(p.nbar_b) {
                    out.push(format!("truncation dim_b = {dim_b} is below 4·nbar_b + 5 = {}", need(p.nbar_b)));
                }
            }
        }
        out.dedup();
        self.warnings = out;
    }
}

fn parse_params(map: &BTreeMap<String, Value>, renormalized: bool) -> CliResult<(SystemParams, Option<f64>)> {
    let mut values: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut ns_prime = None;
    for (key, v) in map {
        if key == "ns_prime" {
            ns_prime = Some(number(key, v)?);
            continue;
        }
        let (name, scale) = resolve_key(key, renormalized)?;
        if values.insert(name, number(key, v)? * scale).is_some() {
            return Err(config(format!("parameter `{name}` given twice")));
        }
    }
    let spelled = |name: &str| {
        if SystemParams::is_frequency(name) && !renormalized {
            format!("{name}_over_2pi")
        } else {
            name.to_string()
        }
    };
    let mut get = |name: &'static str| values.remove(name).ok_or_else(|| config(format!("params: missing field `{}`", spelled(name))));
    let omega_z = get("omega_z")?;
    let params = SystemParams {
        omega_z,
        delta: get("delta").unwrap_or(omega_z),
        g_a: get("g_a")?,
        g_b: get("g_b")?,
        g_ab: get("g_ab")?,
        gamma_a: get("gamma_a")?,
        gamma_b: get("gamma_b")?,
        gamma_spin: get("Gamma")?,
        nbar_a: get("nbar_a")?,
        nbar_b: get("nbar_b")?,
    };
    if let Some(ns) = ns_prime {
        if !(ns >= 0.0) || !ns.is_finite() {
            return Err(config(format!("`ns_prime` = {ns} must be ≥ 0")));
        }
    }
    Ok((params, ns_prime))
}

fn parse_sweep(raw: RawSweep, renormalized: bool) -> CliResult<Sweep> {
    let (name, scale) = resolve_key(&raw.parameter, renormalized).map_err(|e| match e {
        CliError::Config(m) => config(format!("sweep: {m}")),
        other => other,
    })?;
    let key = raw.parameter;
    let values = match (raw.values, raw.start, raw.stop, raw.count) {
        (Some(v), None, None, None) => v,
        (None, Some(start), Some(stop), Some(count)) => {
            if count == 0 {
                return Err(config(format!("sweep `{key}`: `count` must be ≥ 1")));
            }
            let frac = |k: usize| if count == 1 { 0.0 } else { k as f64 / (count - 1) as f64 };
            match raw.spacing.unwrap_or(Spacing::Linear) {
                Spacing::Linear => (0..count).map(|k| start + (stop - start) * frac(k)).collect(),
                Spacing::Log => {
                    if !(start > 0.0 && stop > 0.0) {
                        return Err(config(format!("sweep `{key}`: log spacing needs positive `start` and `stop`")));
                    }
                    (0..count).map(|k| start * (stop / start).powf(frac(k))).collect()
                }
            }
        }
        _ => return Err(config(format!("sweep `{key}`: give either `values` or `start`, `stop` and `count`"))),
    };
    if values.is_empty() {
        return Err(config(format!("sweep `{key}`: `values` is empty")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(config(format!("sweep `{key}`: value {v} is not finite")));
    }
    Ok(Sweep { name, key, values, scale })
}

fn parse_integrator(raw: RawIntegrator) -> CliResult<Integrator> {
    let spec = IntegratorSpec::new(raw.dt, raw.t_final, raw.record_stride).map_err(|e| config(format!("integrator: {e}")))?;
    let window = raw.stationarity_window.unwrap_or(0.1 * raw.t_final);
    let tol = raw.stationarity_tol.unwrap_or(1e-3);
    if !(window >= 0.0) || !(tol > 0.0) {
        return Err(config("integrator: `stationarity_window` must be ≥ 0 and `stationarity_tol` > 0"));
    }
    Ok(Integrator { spec, window, tol })
}
