//! Spin ⊗ mode b master equation left after adiabatically eliminating mode a.
//!
//! Mode a enters only through two effective channels: the exchange processes
//! `bσ₊` and `b†σ₋` with rates set by `g_ab²/κ`, and a small thermal
//! excitation `n_s′` of the spin.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::hilbert::{
    annihilation, embed, number, product_operator, sigma_minus, sigma_plus, sigma_z, thermal_state, ComplexMatrix,
    DensityMatrix, Slot, SpaceLayout, SparseOperator,
};
use crate::liouville::{evolve_with, stationary_populations, Engine, EvolveOptions, Evolution, IntegratorSpec, Trajectory};
use crate::model::{LindbladTerm, SystemParams};
use crate::par::Exec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub omega_z: f64,
    pub delta: f64,
    pub g_a: f64,
    pub g_ab: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    #[serde(rename = "Gamma")]
    pub gamma_spin: f64,
    pub nbar_a: f64,
    pub nbar_b: f64,
    /// Replaces the derived `n_s′` when set.
    #[serde(default)]
    pub ns_prime_override: Option<f64>,
}

impl From<&SystemParams> for ReducedParams {
    fn from(p: &SystemParams) -> Self {
        Self {
            omega_z: p.omega_z,
            delta: p.delta,
            g_a: p.g_a,
            g_ab: p.g_ab,
            gamma_a: p.gamma_a,
            gamma_b: p.gamma_b,
            gamma_spin: p.gamma_spin,
            nbar_a: p.nbar_a,
            nbar_b: p.nbar_b,
            ns_prime_override: None,
        }
    }
}

impl ReducedParams {
    /// `γ_a + γ_b + Γ`
    pub fn kappa(&self) -> f64 {
        self.gamma_a + self.gamma_b + self.gamma_spin
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_z", self.omega_z),
            ("delta", self.delta),
            ("g_a", self.g_a),
            ("g_ab", self.g_ab),
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("Gamma", self.gamma_spin),
            ("nbar_a", self.nbar_a),
            ("nbar_b", self.nbar_b),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidValue { name: "ReducedParams", reason: format!("{name} = {v} must be finite and ≥ 0") });
            }
        }
        if !(self.kappa() > 0.0) {
            return Err(Error::InvalidRegime("gamma_a + gamma_b + Gamma must be > 0".into()));
        }
        if let Some(ns) = self.ns_prime_override {
            if !(ns >= 0.0) || !ns.is_finite() {
                return Err(Error::InvalidValue { name: "ns_prime_override", reason: format!("{ns} must be ≥ 0") });
            }
        }
        Ok(())
    }

    /// `g_ab²/κ`, the rate scale of the exchange channels.
    pub fn exchange_rate(&self) -> f64 {
        self.g_ab * self.g_ab / self.kappa()
    }

    /// `Γ·n_s′`, finite even at `Γ = 0`.
    pub fn spin_heating_rate(&self) -> f64 {
        match self.ns_prime_override {
            Some(ns) => self.gamma_spin * ns,
            None => {
                let r = 2.0 * self.gamma_a + self.gamma_spin;
                r * self.g_a * self.g_a * (self.nbar_a * self.nbar_a + self.nbar_a) / (self.omega_z * self.omega_z + r * r)
            }
        }
    }
}

/// Effective spin occupation `n_s′ = (2γ_a+Γ) g_a² (n̄_a²+n̄_a) / (Γ(ω_z² + (2γ_a+Γ)²))`.
pub fn ns_prime(p: &ReducedParams) -> Result<f64> {
    if let Some(ns) = p.ns_prime_override {
        return Ok(ns);
    }
    if !(p.gamma_spin > 0.0) {
        return Err(Error::InvalidRegime("n_s' needs Gamma > 0".into()));
    }
    if !(p.omega_z > 0.0) {
        return Err(Error::InvalidRegime("n_s' needs omega_z > 0".into()));
    }
    Ok(p.spin_heating_rate() / p.gamma_spin)
}

/// `(ω_z/2)σ_z + Δ b†b` on spin ⊗ b.
pub fn build_reduced_h0(p: &ReducedParams, layout: &SpaceLayout) -> Result<SparseOperator> {
    let dim_b = layout.slot_dim(Slot::ModeB)?;
    let sz = embed(&sigma_z(), Slot::Spin, layout)?.scaled(C64::new(p.omega_z / 2.0, 0.0));
    sz.add(&embed(&number(dim_b)?, Slot::ModeB, layout)?.scaled(C64::new(p.delta, 0.0)))
}

/// The six collapse terms, in order: `bσ₊`, `b†σ₋`, `σ₋`, `σ₊`, `b`, `b†`.
pub fn build_reduced_terms(p: &ReducedParams, layout: &SpaceLayout) -> Result<Vec<LindbladTerm>> {
    p.validate()?;
    let dim_b = layout.slot_dim(Slot::ModeB)?;
    layout.slot_dim(Slot::Spin)?;
    let g = p.exchange_rate();
    let heat = p.spin_heating_rate();
    let b = annihilation(dim_b)?;
    let b_sp = product_operator(layout, &[(Slot::Spin, sigma_plus()), (Slot::ModeB, b.clone())])?;
    let bd_sm = b_sp.adjoint();
    let sm = embed(&sigma_minus(), Slot::Spin, layout)?;
    let sp = sm.adjoint();
    let b = embed(&b, Slot::ModeB, layout)?;
    let bd = b.adjoint();
    Ok(vec![
        LindbladTerm::new(b_sp, g * (1.0 + p.nbar_a))?,
        LindbladTerm::new(bd_sm, g * p.nbar_a)?,
        LindbladTerm::new(sm, p.gamma_spin + heat)?,
        LindbladTerm::new(sp, heat)?,
        LindbladTerm::new(b, p.gamma_b * (1.0 + p.nbar_b))?,
        LindbladTerm::new(bd, p.gamma_b * p.nbar_b)?,
    ])
}

/// `n_b + n_s`, conserved by the reduced Hamiltonian and shifted uniformly by
/// every reduced collapse operator.
pub fn reduced_charge(layout: &SpaceLayout) -> Result<Vec<i64>> {
    (0..layout.dim())
        .map(|i| Ok((layout.level(i, Slot::ModeB)? + layout.level(i, Slot::Spin)?) as i64))
        .collect()
}

/// Spin in `|0⟩`, mode b thermal at `n̄_b`.
pub fn reduced_initial_state(p: &ReducedParams, dim_b: usize) -> Result<DensityMatrix> {
    let layout = SpaceLayout::reduced(dim_b)?;
    DensityMatrix::product(&layout, &[ComplexMatrix::projector(2, 0), thermal_state(dim_b, p.nbar_b)?])
}

pub fn reduced_observables(layout: &SpaceLayout) -> Result<Vec<(String, SparseOperator)>> {
    let dim_b = layout.slot_dim(Slot::ModeB)?;
    Ok(vec![
        ("n_b".to_string(), embed(&number(dim_b)?, Slot::ModeB, layout)?),
        ("n_s".to_string(), embed(&sigma_plus().mul(&sigma_minus())?, Slot::Spin, layout)?),
    ])
}

/// Propagate the reduced master equation, recording `n_b` and `n_s`.
pub fn evolve_reduced(rho0: &DensityMatrix, p: &ReducedParams, spec: &IntegratorSpec) -> Result<Trajectory> {
    Ok(evolve_reduced_with(rho0, p, spec, Exec::default())?.trajectory)
}

pub fn evolve_reduced_with(rho0: &DensityMatrix, p: &ReducedParams, spec: &IntegratorSpec, exec: Exec) -> Result<Evolution> {
    let layout = rho0.layout();
    let h = build_reduced_h0(p, layout)?;
    let terms = build_reduced_terms(p, layout)?;
    let options = EvolveOptions { exec, engine: Engine::Charge(reduced_charge(layout)?), stationarity: None };
    evolve_with(rho0, &h, &terms, spec, &reduced_observables(layout)?, &options)
}

/// Stationary reduced-model expectations.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedStationary {
    pub n_b: f64,
    pub n_s: f64,
    /// Population of the top retained level of mode b, a truncation gauge.
    pub top_level_population: f64,
}

/// Exact stationary state of the truncated reduced model.
///
/// The reduced Hamiltonian is diagonal and every collapse operator maps basis
/// states to basis states, so the stationary populations solve a classical
/// rate equation; this avoids integrating across the `1/ω_z` timescale.
pub fn stationary_reduced(p: &ReducedParams, dim_b: usize) -> Result<ReducedStationary> {
    let layout = SpaceLayout::reduced(dim_b)?;
    let h = build_reduced_h0(p, &layout)?;
    let terms = build_reduced_terms(p, &layout)?;
    let pops = stationary_populations(&h, &terms)?;
    let (mut n_b, mut n_s, mut top) = (0.0, 0.0, 0.0);
    for (i, &w) in pops.iter().enumerate() {
        let level = layout.level(i, Slot::ModeB)?;
        n_b += w * level as f64;
        n_s += w * layout.level(i, Slot::Spin)? as f64;
        if level == dim_b - 1 {
            top += w;
        }
    }
    Ok(ReducedStationary { n_b, n_s, top_level_population: top })
}
