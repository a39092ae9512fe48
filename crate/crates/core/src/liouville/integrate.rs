use std::collections::BTreeMap;

use super::sector::{BlockObservable, BlockState, SectorLiouvillian, Sectors};
use super::Liouvillian;
use crate::hilbert::{ComplexMatrix, DensityMatrix, SparseOperator};
use crate::model::LindbladTerm;
use crate::par::Exec;
use crate::{Error, Result};

/// Largest tolerated `|tr ρ − 1|` after any step.
pub const TRACE_LIMIT: f64 = 1e-6;

/// Fixed-step schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
}

impl IntegratorSpec {
    pub fn new(dt: f64, t_final: f64, record_stride: usize) -> Result<Self> {
        let spec = Self { dt, t_final, record_stride };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidSpec(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(Error::InvalidSpec(format!("t_final = {} must be ≥ dt = {}", self.t_final, self.dt)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidSpec("record_stride must be ≥ 1".into()));
        }
        Ok(())
    }

    /// `round(t_final / dt)`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// The same schedule on a time axis stretched by `1/factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { dt: self.dt / factor, t_final: self.t_final / factor, record_stride: self.record_stride }
    }
}

/// Recorded observables and diagnostics of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `values[k][m]` is observable `names[m]` at `times[k]`.
    pub values: Vec<Vec<f64>>,
    /// `|tr ρ − 1|` at each record.
    pub trace_error: Vec<f64>,
    /// Largest Hermitian re-symmetrization change since the previous record.
    pub asymmetry: Vec<f64>,
    pub stationary_at: Option<f64>,
}

impl Trajectory {
    pub fn new(names: Vec<String>) -> Self {
        Self { times: vec![], names, values: vec![], trace_error: vec![], asymmetry: vec![], stationary_at: None }
    }

    pub fn push(&mut self, time: f64, values: Vec<f64>, trace_error: f64, asymmetry: f64) {
        debug_assert_eq!(values.len(), self.names.len());
        debug_assert!(self.times.last().map_or(true, |&t| t < time));
        self.times.push(time);
        self.values.push(values);
        self.trace_error.push(trace_error);
        self.asymmetry.push(asymmetry);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| Error::UnknownObservable(name.to_string()))
    }

    pub fn series(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        Ok(self.values.iter().map(|v| v[c]).collect())
    }

    pub fn final_value(&self, name: &str) -> Result<f64> {
        let c = self.column(name)?;
        self.values.last().map(|v| v[c]).ok_or(Error::EmptySelection)
    }

    pub fn record(&self, k: usize) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(self.values[k].iter().copied()).collect()
    }

    pub fn max_trace_error(&self) -> f64 {
        self.trace_error.iter().copied().fold(0.0, f64::max)
    }

    /// Earliest record time after which `name` stays within a band of width
    /// `tol`, provided that band spans at least `window`.
    pub fn stationary_since(&self, name: &str, window: f64, tol: f64) -> Result<Option<f64>> {
        let series = self.series(name)?;
        let Some(&t_end) = self.times.last() else { return Ok(None) };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut first = None;
        for k in (0..series.len()).rev() {
            lo = lo.min(series[k]);
            hi = hi.max(series[k]);
            if hi - lo >= tol {
                break;
            }
            first = Some(k);
        }
        Ok(first.map(|k| self.times[k]).filter(|&t| t_end - t >= window * (1.0 - 1e-12)))
    }
}

/// Whether `max − min` of `name` over the trailing `window` is below `tol`.
pub fn steady_state_reached(traj: &Trajectory, name: &str, window: f64, tol: f64) -> Result<bool> {
    let series = traj.series(name)?;
    let (Some(&t0), Some(&t_end)) = (traj.times.first(), traj.times.last()) else {
        return Err(Error::EmptySelection);
    };
    if !(window >= 0.0) || window > (t_end - t0) * (1.0 + 1e-12) {
        return Err(Error::InvalidValue { name: "window", reason: format!("{window} exceeds the recorded span {}", t_end - t0) });
    }
    let start = t_end - window * (1.0 + 1e-12);
    let (lo, hi) = traj
        .times
        .iter()
        .zip(&series)
        .filter(|(&t, _)| t >= start)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| (lo.min(v), hi.max(v)));
    Ok(hi - lo < tol)
}

/// Classical fourth-order Runge–Kutta step on a dense state, followed by
/// Hermitian re-symmetrization.
pub fn rk4_step<F>(rho: &DensityMatrix, dt: f64, rhs: F) -> Result<DensityMatrix>
where
    F: Fn(&ComplexMatrix) -> Result<ComplexMatrix>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidSpec(format!("dt = {dt} must be > 0")));
    }
    let y = rho.matrix();
    let shifted = |k: &ComplexMatrix, h: f64| {
        let mut m = y.clone();
        m.axpy(h.into(), k);
        m
    };
    let k1 = rhs(y)?;
    let k2 = rhs(&shifted(&k1, dt / 2.0))?;
    let k3 = rhs(&shifted(&k2, dt / 2.0))?;
    let k4 = rhs(&shifted(&k3, dt))?;
    let mut out = y.clone();
    out.axpy((dt / 6.0).into(), &k1);
    out.axpy((dt / 3.0).into(), &k2);
    out.axpy((dt / 3.0).into(), &k3);
    out.axpy((dt / 6.0).into(), &k4);
    let asym = out.hermitize();
    log::trace!("rk4 step: hermitian re-symmetrization changed entries by {asym:e}");
    let trace_error = (out.trace() - 1.0).norm();
    if !(trace_error <= TRACE_LIMIT) {
        return Err(Error::IntegratorInstability { time: dt, trace_error });
    }
    Ok(DensityMatrix::new_unchecked(rho.layout().clone(), out))
}

/// Which generator propagates the state.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Engine {
    /// Dense `ρ`, sparse × dense products.
    #[default]
    Dense,
    /// Block-diagonal `ρ` labelled by a conserved charge per basis state.
    Charge(Vec<i64>),
}

/// Stationarity test applied when a run finishes.
#[derive(Clone, Debug, PartialEq)]
pub struct Stationarity {
    pub observable: String,
    pub window: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvolveOptions {
    pub exec: Exec,
    pub engine: Engine,
    /// When `None`, [`evolve_with`] uses `n_b` (or the first observable) with a
    /// window of a tenth of the run and tolerance 1e-3.
    pub stationarity: Option<Stationarity>,
}

/// Trajectory plus the final state.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub trajectory: Trajectory,
    sectors: Sectors,
    state: BlockState,
    layout: crate::hilbert::SpaceLayout,
}

impl Evolution {
    pub fn final_state(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(self.layout.clone(), self.state.to_dense(&self.sectors))
    }

    pub fn final_blocks(&self) -> &BlockState {
        &self.state
    }

    pub fn sectors(&self) -> &Sectors {
        &self.sectors
    }

    /// Smallest eigenvalue of the final `ρ`, computed block by block.
    pub fn min_eigenvalue(&self) -> f64 {
        self.state.min_eigenvalue()
    }
}

/// Propagate with default options and return the recorded trajectory.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &SparseOperator,
    terms: &[LindbladTerm],
    spec: &IntegratorSpec,
    observables: &[(String, SparseOperator)],
) -> Result<Trajectory> {
    Ok(evolve_with(rho0, h, terms, spec, observables, &EvolveOptions::default())?.trajectory)
}

struct Rk4Buffers {
    k: BlockState,
    tmp: BlockState,
    acc: BlockState,
}

impl Rk4Buffers {
    fn new(sectors: &Sectors) -> Self {
        Self { k: BlockState::zeros(sectors), tmp: BlockState::zeros(sectors), acc: BlockState::zeros(sectors) }
    }

    fn step<G>(&mut self, y: &mut BlockState, dt: f64, exec: Exec, rhs: &G)
    where
        G: Fn(&BlockState, &mut BlockState),
    {
        let Self { k, tmp, acc } = self;
        rhs(y, k);
        acc.assign_axpy(y, dt / 6.0, k, exec);
        tmp.assign_axpy(y, dt / 2.0, k, exec);
        rhs(tmp, k);
        acc.add_scaled(dt / 3.0, k, exec);
        tmp.assign_axpy(y, dt / 2.0, k, exec);
        rhs(tmp, k);
        acc.add_scaled(dt / 3.0, k, exec);
        tmp.assign_axpy(y, dt, k, exec);
        rhs(tmp, k);
        acc.add_scaled(dt / 6.0, k, exec);
        std::mem::swap(y, acc);
    }
}

pub fn evolve_with(
    rho0: &DensityMatrix,
    h: &SparseOperator,
    terms: &[LindbladTerm],
    spec: &IntegratorSpec,
    observables: &[(String, SparseOperator)],
    options: &EvolveOptions,
) -> Result<Evolution> {
    spec.validate()?;
    let dim = rho0.layout().dim();
    if h.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: h.dim() });
    }
    let exec = options.exec;

    enum Gen {
        Dense(Liouvillian),
        Sector(SectorLiouvillian),
    }
    let (sectors, generator) = match &options.engine {
        Engine::Dense => (Sectors::single(dim)?, Gen::Dense(Liouvillian::new(h, terms)?)),
        Engine::Charge(charge) => {
            let s = SectorLiouvillian::new(h, terms, charge)?;
            (s.sectors().clone(), Gen::Sector(s))
        }
    };
    let rhs = |rho: &BlockState, out: &mut BlockState| match &generator {
        Gen::Dense(l) => l.apply_hermitian_into(rho.blocks()[0].as_slice(), out.blocks_mut()[0].as_mut_slice(), exec),
        Gen::Sector(l) => l.apply_into(rho, out, exec),
    };

    let compiled = observables
        .iter()
        .map(|(_, op)| BlockObservable::new(&sectors, op))
        .collect::<Result<Vec<_>>>()?;
    let measure = |s: &BlockState| compiled.iter().map(|o| o.value(s)).collect::<Vec<_>>();

    let mut state = BlockState::from_dense(&sectors, rho0.matrix())?;
    let mut traj = Trajectory::new(observables.iter().map(|(n, _)| n.clone()).collect());
    traj.push(0.0, measure(&state), (state.trace() - 1.0).norm(), 0.0);

    let n_steps = spec.n_steps();
    let mut buffers = Rk4Buffers::new(&sectors);
    let mut asym_since_record = 0.0f64;
    for step in 1..=n_steps {
        buffers.step(&mut state, spec.dt, exec, &rhs);
        let asym = state.hermitize();
        asym_since_record = asym_since_record.max(asym);
        let time = step as f64 * spec.dt;
        let trace_error = (state.trace() - 1.0).norm();
        if !(trace_error <= TRACE_LIMIT) || !state.is_finite() {
            return Err(Error::IntegratorInstability { time, trace_error });
        }
        if step % spec.record_stride == 0 || step == n_steps {
            log::trace!("t = {time:.6}: trace error {trace_error:e}, re-symmetrization {asym_since_record:e}");
            traj.push(time, measure(&state), trace_error, asym_since_record);
            asym_since_record = 0.0;
        }
    }

    let criterion = match &options.stationarity {
        Some(s) => Some(s.clone()),
        None => {
            let name = traj.names.iter().find(|n| *n == "n_b").or(traj.names.first());
            name.map(|n| Stationarity { observable: n.clone(), window: spec.t_final / 10.0, tol: 1e-3 })
        }
    };
    if let Some(c) = criterion {
        traj.stationary_at = traj.stationary_since(&c.observable, c.window, c.tol)?;
    }
    Ok(Evolution { trajectory: traj, sectors, state, layout: rho0.layout().clone() })
}
