//! Hamiltonians, collapse operators and physical parameter conversions.
//!
//! Dynamics run in the frame rotating at `ω_a(a†a + b†b)`, which commutes with
//! the full interaction, so the free part reduces to `(ω_z/2)σ_z + Δ b†b`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::hilbert::{
    annihilation, embed, number, product_operator, sigma_minus, sigma_plus, sigma_x, sigma_z, thermal_state,
    ComplexMatrix, DensityMatrix, Slot, SpaceLayout, SparseOperator,
};
use crate::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Electron g-factor used for the NV spin.
pub const G_S: f64 = 2.0;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Model rates and frequencies (angular, ħ = 1) and bath occupations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_z: f64,
    /// `ω_b − ω_a`; equals `omega_z` at resonance.
    pub delta: f64,
    pub g_a: f64,
    pub g_b: f64,
    pub g_ab: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Laser-induced spin decay rate Γ.
    #[serde(rename = "Gamma")]
    pub gamma_spin: f64,
    pub nbar_a: f64,
    pub nbar_b: f64,
}

impl SystemParams {
    /// Field names in a fixed order, matching [`SystemParams::get`].
    pub const NAMES: [&'static str; 10] =
        ["omega_z", "delta", "g_a", "g_b", "g_ab", "gamma_a", "gamma_b", "Gamma", "nbar_a", "nbar_b"];

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "omega_z" => self.omega_z,
            "delta" => self.delta,
            "g_a" => self.g_a,
            "g_b" => self.g_b,
            "g_ab" => self.g_ab,
            "gamma_a" => self.gamma_a,
            "gamma_b" => self.gamma_b,
            "Gamma" => self.gamma_spin,
            "nbar_a" => self.nbar_a,
            "nbar_b" => self.nbar_b,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "omega_z" => &mut self.omega_z,
            "delta" => &mut self.delta,
            "g_a" => &mut self.g_a,
            "g_b" => &mut self.g_b,
            "g_ab" => &mut self.g_ab,
            "gamma_a" => &mut self.gamma_a,
            "gamma_b" => &mut self.gamma_b,
            "Gamma" => &mut self.gamma_spin,
            "nbar_a" => &mut self.nbar_a,
            "nbar_b" => &mut self.nbar_b,
            _ => return Err(Error::InvalidValue { name: "parameter", reason: format!("unknown name `{name}`") }),
        };
        *slot = value;
        Ok(())
    }

    /// Whether a field is a rate/frequency (as opposed to an occupation).
    pub fn is_frequency(name: &str) -> bool {
        !matches!(name, "nbar_a" | "nbar_b")
    }

    pub fn validate(&self) -> Result<()> {
        for name in Self::NAMES {
            let v = self.get(name).expect("known name");
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidValue { name: "SystemParams", reason: format!("{name} = {v} must be finite and ≥ 0") });
            }
        }
        if self.omega_z <= 0.0 {
            return Err(Error::InvalidValue { name: "omega_z", reason: "must be > 0".into() });
        }
        Ok(())
    }

    pub fn check_resonance(&self) -> Result<()> {
        if (self.delta - self.omega_z).abs() > 1e-9 * self.omega_z {
            return Err(Error::InvalidRegime(format!(
                "reduced and mean-field models require delta = omega_z (got {} vs {})",
                self.delta, self.omega_z
            )));
        }
        Ok(())
    }

    /// Multiply every rate and frequency by `factor`; occupations are kept.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = *self;
        for name in Self::NAMES {
            if Self::is_frequency(name) {
                out.set(name, self.get(name).unwrap() * factor).unwrap();
            }
        }
        out
    }
}

/// Collapse operator with the coefficient multiplying `D_x` in the master
/// equation, where `D_x(ρ) = 2xρx† − x†xρ − ρx†x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladTerm {
    pub operator: SparseOperator,
    pub weight: f64,
}

impl LindbladTerm {
    pub fn new(operator: SparseOperator, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidValue { name: "weight", reason: format!("collapse weight {weight} must be ≥ 0") });
        }
        Ok(Self { operator, weight })
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `(ω_z/2)σ_z + Δ b†b`
pub fn build_h0(params: &SystemParams, layout: &SpaceLayout) -> Result<SparseOperator> {
    let dim_b = layout.slot_dim(Slot::ModeB)?;
    let sz = embed(&sigma_z(), Slot::Spin, layout)?.scaled(c(params.omega_z / 2.0));
    let nb = embed(&number(dim_b)?, Slot::ModeB, layout)?.scaled(c(params.delta));
    sz.add(&nb)
}

/// `(g_a a†a + g_b b†b + g_ab(a†b + ab†)) σ_x`
pub fn build_h1_full(params: &SystemParams, layout: &SpaceLayout) -> Result<SparseOperator> {
    let (dim_a, dim_b) = (layout.slot_dim(Slot::ModeA)?, layout.slot_dim(Slot::ModeB)?);
    let a = embed(&annihilation(dim_a)?, Slot::ModeA, layout)?;
    let b = embed(&annihilation(dim_b)?, Slot::ModeB, layout)?;
    let na = embed(&number(dim_a)?, Slot::ModeA, layout)?;
    let nb = embed(&number(dim_b)?, Slot::ModeB, layout)?;
    let sx = embed(&sigma_x(), Slot::Spin, layout)?;
    let exchange = a.adjoint().mul(&b)?.add(&a.mul(&b.adjoint())?)?;
    let mode_part = na
        .scaled(c(params.g_a))
        .add(&nb.scaled(c(params.g_b)))?
        .add(&exchange.scaled(c(params.g_ab)))?;
    mode_part.mul(&sx)
}

/// `g_a δ(σ₊ + σ₋) + g_ab(a†bσ₊ + ab†σ₋)` with `δ = a†a − n̄_a`.
pub fn build_h1_rwa(params: &SystemParams, layout: &SpaceLayout) -> Result<SparseOperator> {
    let (dim_a, dim_b) = (layout.slot_dim(Slot::ModeA)?, layout.slot_dim(Slot::ModeB)?);
    let n = layout.dim();
    let fluctuation = embed(&number(dim_a)?, Slot::ModeA, layout)?.sub(&SparseOperator::identity(n).scaled(c(params.nbar_a)))?;
    let sx = embed(&sigma_x(), Slot::Spin, layout)?;
    let a = annihilation(dim_a)?;
    let b = annihilation(dim_b)?;
    let raising = product_operator(layout, &[(Slot::Spin, sigma_plus()), (Slot::ModeA, a.adjoint()), (Slot::ModeB, b.clone())])?;
    let lowering = raising.adjoint();
    fluctuation.mul(&sx)?.scaled(c(params.g_a)).add(&raising.add(&lowering)?.scaled(c(params.g_ab)))
}

/// Thermal contact of both modes plus laser-driven spin decay:
/// `(γ_a(1+n̄_a), a)`, `(γ_a n̄_a, a†)`, `(γ_b(1+n̄_b), b)`, `(γ_b n̄_b, b†)`, `(Γ, σ₋)`.
pub fn build_collapse_terms(params: &SystemParams, layout: &SpaceLayout) -> Result<Vec<LindbladTerm>> {
    let (dim_a, dim_b) = (layout.slot_dim(Slot::ModeA)?, layout.slot_dim(Slot::ModeB)?);
    let a = embed(&annihilation(dim_a)?, Slot::ModeA, layout)?;
    let b = embed(&annihilation(dim_b)?, Slot::ModeB, layout)?;
    let sm = embed(&sigma_minus(), Slot::Spin, layout)?;
    Ok(vec![
        LindbladTerm::new(a.clone(), params.gamma_a * (1.0 + params.nbar_a))?,
        LindbladTerm::new(a.adjoint(), params.gamma_a * params.nbar_a)?,
        LindbladTerm::new(b.clone(), params.gamma_b * (1.0 + params.nbar_b))?,
        LindbladTerm::new(b.adjoint(), params.gamma_b * params.nbar_b)?,
        LindbladTerm::new(sm, params.gamma_spin)?,
    ])
}

/// Total phonon number `n_a + n_b` of each basis state. The full and RWA
/// Hamiltonians conserve it and every collapse operator shifts it by a fixed
/// amount, so it labels invariant blocks of the density matrix.
pub fn phonon_charge(layout: &SpaceLayout) -> Vec<i64> {
    (0..layout.dim())
        .map(|i| {
            [Slot::ModeA, Slot::ModeB]
                .iter()
                .filter_map(|&s| layout.level(i, s).ok())
                .map(|l| l as i64)
                .sum()
        })
        .collect()
}

/// Spin in `|0⟩`, each mode thermal at its bath occupation.
pub fn initial_state(params: &SystemParams, layout: &SpaceLayout) -> Result<DensityMatrix> {
    let factors = layout
        .slots()
        .iter()
        .map(|&(slot, d)| match slot {
            Slot::Spin => Ok(ComplexMatrix::projector(2, 0)),
            Slot::ModeA => thermal_state(d, params.nbar_a),
            Slot::ModeB => thermal_state(d, params.nbar_b),
        })
        .collect::<Result<Vec<_>>>()?;
    DensityMatrix::product(layout, &factors)
}

/// `n_s = σ₊σ₋`, `n_a`, `n_b` for whichever slots the layout has.
pub fn number_observables(layout: &SpaceLayout) -> Result<Vec<(String, SparseOperator)>> {
    let mut out = Vec::new();
    for &(slot, d) in layout.slots() {
        let (name, op) = match slot {
            Slot::Spin => ("n_s", sigma_plus().mul(&sigma_minus())?),
            Slot::ModeA => ("n_a", number(d)?),
            Slot::ModeB => ("n_b", number(d)?),
        };
        out.push((name.to_string(), embed(&op, slot, layout)?));
    }
    Ok(out)
}

/// Laboratory quantities from which [`SystemParams`] can be derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// kg
    pub mass_a: f64,
    /// kg
    pub mass_b: f64,
    /// rad/s
    pub omega_a: f64,
    /// rad/s
    pub omega_b: f64,
    /// Second-order magnetic gradient, T/m².
    pub g2: f64,
    /// Environment temperature, K.
    pub temperature: f64,
    pub quality_factor: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass_a", self.mass_a),
            ("mass_b", self.mass_b),
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("G2", self.g2),
            ("temperature", self.temperature),
            ("quality_factor", self.quality_factor),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidValue { name: "PhysicalParams", reason: format!("{name} = {v} must be > 0") });
            }
        }
        if self.omega_b <= self.omega_a {
            return Err(Error::InvalidValue { name: "omega_b", reason: "mode b must have the higher frequency".into() });
        }
        Ok(())
    }

    /// Resonant model parameters: `ω_z = Δ = ω_b − ω_a`, `γ_a = γ_b = ω_a/Q`,
    /// `n̄_b` from the environment temperature. `n̄_a` is the heating-bath
    /// occupation; when absent it is taken from the environment too.
    pub fn to_system(&self, spin_decay: f64, nbar_a: Option<f64>) -> Result<SystemParams> {
        self.validate()?;
        let x_a = zero_point_fluctuation(self.mass_a, self.omega_a)?;
        let x_b = zero_point_fluctuation(self.mass_b, self.omega_b)?;
        let gamma = self.omega_a / self.quality_factor;
        let detuning = self.omega_b - self.omega_a;
        let params = SystemParams {
            omega_z: detuning,
            delta: detuning,
            g_a: coupling_from_gradient(self.g2, x_a, x_a)?,
            g_b: coupling_from_gradient(self.g2, x_b, x_b)?,
            g_ab: coupling_from_gradient(self.g2, x_a, x_b)?,
            gamma_a: gamma,
            gamma_b: gamma,
            gamma_spin: spin_decay,
            nbar_a: nbar_a.unwrap_or_else(|| bose_occupation(self.omega_a, self.temperature)),
            nbar_b: bose_occupation(self.omega_b, self.temperature),
        };
        params.validate()?;
        Ok(params)
    }
}

/// `√(ħ / 2mω)` in metres.
pub fn zero_point_fluctuation(mass: f64, omega: f64) -> Result<f64> {
    if !(mass > 0.0) || !(omega > 0.0) {
        return Err(Error::InvalidValue { name: "zero_point_fluctuation", reason: format!("mass {mass} and omega {omega} must be > 0") });
    }
    Ok((HBAR / (2.0 * mass * omega)).sqrt())
}

/// `g_s μ_B G₂ x₁ x₂ / ħ`, an angular rate.
pub fn coupling_from_gradient(g2: f64, x1: f64, x2: f64) -> Result<f64> {
    if !(g2 > 0.0) || !(x1 > 0.0) || !(x2 > 0.0) {
        return Err(Error::InvalidValue { name: "coupling_from_gradient", reason: "inputs must be > 0".into() });
    }
    Ok(G_S * MU_B * g2 * x1 * x2 / HBAR)
}

/// Bose–Einstein occupation `1/(e^{ħω/k_BT} − 1)`; zero at `T = 0`.
pub fn bose_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

/// Convert a value given as "Hz divided by 2π" to an angular rate.
pub fn angular(hz: f64) -> f64 {
    2.0 * PI * hz
}

/// A violated "≪" condition. Thresholds use a factor of 100.
#[derive(Clone, Debug, PartialEq)]
pub enum RegimeWarning {
    WeakCoupling { term: &'static str, value: f64, limit: f64 },
    RotatingWave { sqrt_nbar_a: f64, limit: f64 },
    TimescaleSeparation { max_rate: f64, limit: f64 },
}

impl fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WeakCoupling { term, value, limit } => {
                write!(f, "weak coupling violated: {term} = {value:.4e} is not ≪ omega_z (limit {limit:.4e})")
            }
            Self::RotatingWave { sqrt_nbar_a, limit } => {
                write!(f, "rotating-wave approximation violated: sqrt(nbar_a) = {sqrt_nbar_a:.4e} is not ≪ delta/g_ab (limit {limit:.4e})")
            }
            Self::TimescaleSeparation { max_rate, limit } => {
                write!(f, "timescale separation violated: max(Gamma, gamma_a, gamma_b) = {max_rate:.4e} is not ≪ omega_z (limit {limit:.4e})")
            }
        }
    }
}

const MUCH_LESS: f64 = 100.0;

pub fn validate_regime(params: &SystemParams) -> Vec<RegimeWarning> {
    let mut out = Vec::new();
    let limit = params.omega_z / MUCH_LESS;
    let couplings = [
        ("g_a*sqrt(nbar_a)", params.g_a * params.nbar_a.sqrt()),
        ("g_b*sqrt(nbar_b)", params.g_b * params.nbar_b.sqrt()),
        ("g_ab*sqrt(nbar_a*nbar_b)", params.g_ab * (params.nbar_a * params.nbar_b).sqrt()),
    ];
    for (term, value) in couplings {
        if value >= limit {
            out.push(RegimeWarning::WeakCoupling { term, value, limit });
        }
    }
    if params.g_ab > 0.0 {
        let rwa_limit = params.delta / params.g_ab / MUCH_LESS;
        let s = params.nbar_a.sqrt();
        if s >= rwa_limit {
            out.push(RegimeWarning::RotatingWave { sqrt_nbar_a: s, limit: rwa_limit });
        }
    }
    let max_rate = params.gamma_spin.max(params.gamma_a).max(params.gamma_b);
    if max_rate >= limit {
        out.push(RegimeWarning::TimescaleSeparation { max_rate, limit });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{creation, kron};

    fn cold_bath() -> SystemParams {
        SystemParams {
            omega_z: 2e7,
            delta: 2e7,
            g_a: 3.0,
            g_b: 1.0,
            g_ab: 3f64.sqrt(),
            gamma_a: 1.0,
            gamma_b: 1.0,
            gamma_spin: 30.0,
            nbar_a: 160.0,
            nbar_b: 7.0,
        }
    }

    fn generic() -> SystemParams {
        SystemParams {
            omega_z: 500.0,
            delta: 480.0,
            g_a: 3.0,
            g_b: 1.0,
            g_ab: 3f64.sqrt(),
            gamma_a: 1.0,
            gamma_b: 1.3,
            gamma_spin: 50.0,
            nbar_a: 2.5,
            nbar_b: 1.0,
        }
    }

    fn dense_sigma(which: &str) -> ComplexMatrix {
        match which {
            "x" => ComplexMatrix::from_fn(2, 2, |i, j| c(if i != j { 1.0 } else { 0.0 })),
            "z" => ComplexMatrix::from_real_diagonal(&[-1.0, 1.0]),
            "+" => ComplexMatrix::from_fn(2, 2, |i, j| c(if i == 1 && j == 0 { 1.0 } else { 0.0 })),
            "-" => ComplexMatrix::from_fn(2, 2, |i, j| c(if i == 0 && j == 1 { 1.0 } else { 0.0 })),
            _ => unreachable!(),
        }
    }

    /// Explicit dense ladder matrix, independent of the sparse builders.
    fn dense_lower(d: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(d, d, |i, j| c(if j == i + 1 { (j as f64).sqrt() } else { 0.0 }))
    }

    fn kron3(s: &ComplexMatrix, a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        kron(&kron(s, a), b)
    }

    #[test]
    fn h0_zero_for_zero_frequencies() {
        let mut p = generic();
        p.omega_z = 0.0;
        p.delta = 0.0;
        assert_eq!(build_h0(&p, &SpaceLayout::full(2, 2).unwrap()).unwrap().nnz(), 0);
    }

    #[test]
    fn h0_enumerated_basis() {
        let mut p = generic();
        p.omega_z = 500.0;
        p.delta = 500.0;
        let l = SpaceLayout::full(2, 2).unwrap();
        let h = build_h0(&p, &l).unwrap();
        assert!(h.is_diagonal());
        for i in 0..8 {
            let s = l.level(i, Slot::Spin).unwrap() as f64;
            let nb = l.level(i, Slot::ModeB).unwrap() as f64;
            let expected = if s == 0.0 { -250.0 } else { 250.0 } + 500.0 * nb;
            assert_eq!(h.get(i, i), c(expected));
        }
    }

    #[test]
    fn h1_full_matches_dense_kron_oracle() {
        let p = generic();
        let l = SpaceLayout::full(3, 3).unwrap();
        let h = build_h1_full(&p, &l).unwrap();
        let (a, b) = (dense_lower(3), dense_lower(3));
        let id = ComplexMatrix::identity(3);
        let na = a.adjoint().matmul(&a).unwrap();
        let nb = b.adjoint().matmul(&b).unwrap();
        let sx = dense_sigma("x");
        let mut oracle = kron3(&sx, &na, &id).scaled(c(p.g_a));
        oracle.axpy(c(p.g_b), &kron3(&sx, &id, &nb));
        oracle.axpy(c(p.g_ab), &kron3(&sx, &a.adjoint(), &b));
        oracle.axpy(c(p.g_ab), &kron3(&sx, &a, &b.adjoint()));
        assert!(h.to_dense().max_abs_diff(&oracle) < 1e-13);
        assert!(h.is_hermitian(1e-12));
        let mut zero = p;
        zero.g_a = 0.0;
        zero.g_b = 0.0;
        zero.g_ab = 0.0;
        assert_eq!(build_h1_full(&zero, &l).unwrap().nnz(), 0);
    }

    #[test]
    fn h1_rwa_matches_dense_kron_oracle() {
        let p = generic();
        let l = SpaceLayout::full(3, 3).unwrap();
        let h = build_h1_rwa(&p, &l).unwrap();
        let (a, b) = (dense_lower(3), dense_lower(3));
        let id = ComplexMatrix::identity(3);
        let delta = &a.adjoint().matmul(&a).unwrap() - &id.scaled(c(p.nbar_a));
        let mut oracle = kron3(&dense_sigma("x"), &delta, &id).scaled(c(p.g_a));
        oracle.axpy(c(p.g_ab), &kron3(&dense_sigma("+"), &a.adjoint(), &b));
        oracle.axpy(c(p.g_ab), &kron3(&dense_sigma("-"), &a, &b.adjoint()));
        assert!(h.to_dense().max_abs_diff(&oracle) < 1e-13);
        assert!(h.is_hermitian(1e-12));
    }

    #[test]
    fn h1_rwa_pure_dispersive_term() {
        let mut p = generic();
        p.g_ab = 0.0;
        p.nbar_a = 0.0;
        let l = SpaceLayout::full(3, 2).unwrap();
        let h = build_h1_rwa(&p, &l).unwrap();
        let expected = embed(&number(3).unwrap(), Slot::ModeA, &l)
            .unwrap()
            .mul(&embed(&sigma_x(), Slot::Spin, &l).unwrap())
            .unwrap()
            .scaled(c(p.g_a));
        assert!(h.max_abs_diff(&expected) < 1e-14);
        p.g_a = 0.0;
        assert_eq!(build_h1_rwa(&p, &l).unwrap().nnz(), 0);
    }

    #[test]
    fn total_hamiltonian_hermitian() {
        let l = SpaceLayout::full(4, 3).unwrap();
        for p in [generic(), cold_bath()] {
            let h = build_h0(&p, &l).unwrap().add(&build_h1_full(&p, &l).unwrap()).unwrap();
            assert!(h.is_hermitian(1e-12 * p.omega_z.max(1.0)));
        }
    }

    #[test]
    fn collapse_weights_cold_bath() {
        let mut p = cold_bath();
        p.nbar_b = 7.0;
        let terms = build_collapse_terms(&p, &SpaceLayout::full(3, 3).unwrap()).unwrap();
        let w: Vec<f64> = terms.iter().map(|t| t.weight).collect();
        assert_eq!(w, vec![161.0, 160.0, 8.0, 7.0, 30.0]);
    }

    #[test]
    fn collapse_weights_zero_temperature_and_support() {
        let mut p = generic();
        p.nbar_a = 0.0;
        p.nbar_b = 0.0;
        let l = SpaceLayout::full(3, 4).unwrap();
        let terms = build_collapse_terms(&p, &l).unwrap();
        assert_eq!(terms.len(), 5);
        assert_eq!(terms[1].weight, 0.0);
        assert_eq!(terms[3].weight, 0.0);
        let a = embed(&creation(3).unwrap(), Slot::ModeA, &l).unwrap();
        let b = embed(&annihilation(4).unwrap(), Slot::ModeB, &l).unwrap();
        let s = embed(&sigma_z(), Slot::Spin, &l).unwrap();
        assert_eq!(terms[0].operator.commutator(&b).unwrap().nnz(), 0);
        assert_eq!(terms[0].operator.commutator(&s).unwrap().nnz(), 0);
        assert_eq!(terms[2].operator.commutator(&a).unwrap().nnz(), 0);
        assert_eq!(terms[4].operator.commutator(&a).unwrap().nnz(), 0);
    }

    #[test]
    fn collapse_weights_scale_linearly() {
        let l = SpaceLayout::full(2, 2).unwrap();
        let p = generic();
        let w1: Vec<f64> = build_collapse_terms(&p, &l).unwrap().iter().map(|t| t.weight).collect();
        let w3: Vec<f64> = build_collapse_terms(&p.scaled(3.0), &l).unwrap().iter().map(|t| t.weight).collect();
        for (a, b) in w1.iter().zip(&w3) {
            assert!((3.0 * a - b).abs() < 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn charge_is_conserved_by_hamiltonian() {
        let l = SpaceLayout::full(4, 3).unwrap();
        let q = phonon_charge(&l);
        let p = generic();
        for h in [build_h0(&p, &l).unwrap(), build_h1_full(&p, &l).unwrap(), build_h1_rwa(&p, &l).unwrap()] {
            assert!(h.triplets().all(|(i, j, _)| q[i] == q[j]));
        }
    }

    #[test]
    fn zero_point_fluctuation_values() {
        let x = zero_point_fluctuation(5e-18, angular(1e7)).unwrap();
        let oracle = (1.054571817e-34f64 / (2.0 * 5e-18 * 2.0 * PI * 1e7)).sqrt();
        assert!((x - oracle).abs() < 1e-25);
        assert!((x - 4.10e-13).abs() < 0.01e-13);
        let x4 = zero_point_fluctuation(20e-18, angular(1e7)).unwrap();
        assert!((x4 - x / 2.0).abs() < 1e-27);
        let xb = zero_point_fluctuation(5e-18, angular(3e7)).unwrap();
        assert!((xb - x / 3f64.sqrt()).abs() < 1e-27);
        assert!(zero_point_fluctuation(0.0, 1.0).is_err());
        assert!(zero_point_fluctuation(1.0, -1.0).is_err());
    }

    #[test]
    fn coupling_values_and_ratios() {
        let xa = zero_point_fluctuation(5e-18, angular(1e7)).unwrap();
        let xb = zero_point_fluctuation(5e-18, angular(3e7)).unwrap();
        let ga = coupling_from_gradient(5e14, xa, xa).unwrap();
        let gb = coupling_from_gradient(5e14, xb, xb).unwrap();
        let gab = coupling_from_gradient(5e14, xa, xb).unwrap();
        assert!((ga / (2.0 * PI) - 2.35).abs() < 0.05, "g_a/2π = {}", ga / (2.0 * PI));
        assert!((ga / gb - 3.0).abs() < 1e-12);
        assert!((ga / gab - 3f64.sqrt()).abs() < 1e-12);
        assert!((gab * gab - ga * gb).abs() < 1e-12 * ga * gb);
        let ga2 = coupling_from_gradient(1e15, xa, xa).unwrap();
        assert!((ga2 - 2.0 * ga).abs() < 1e-12 * ga);
        assert!(coupling_from_gradient(-1.0, xa, xa).is_err());
    }

    #[test]
    fn bose_occupation_reference_values() {
        let w = angular(3e7);
        assert!((bose_occupation(w, 10.8e-3) - 7.0).abs() < 0.1);
        assert!((bose_occupation(w, 101.4e-3) - 70.0).abs() < 1.0);
        assert_eq!(bose_occupation(w, 0.0), 0.0);
        assert!(bose_occupation(w, 0.02) > bose_occupation(w, 0.01));
        assert!(bose_occupation(2.0 * w, 0.01) < bose_occupation(w, 0.01));
    }

    #[test]
    fn derived_system_params() {
        let phys = PhysicalParams {
            mass_a: 5e-18,
            mass_b: 5e-18,
            omega_a: angular(1e7),
            omega_b: angular(3e7),
            g2: 5e14,
            temperature: 10.8e-3,
            quality_factor: 1e7,
        };
        let p = phys.to_system(angular(120.0), None).unwrap();
        assert!((p.gamma_a / (2.0 * PI) - 1.0).abs() < 1e-12);
        assert_eq!(p.gamma_a, p.gamma_b);
        assert!((p.omega_z / (2.0 * PI) - 2e7).abs() < 1e-6);
        assert!((p.nbar_b - 7.0).abs() < 0.1);
        let q10 = PhysicalParams { quality_factor: 1e8, ..phys }.to_system(1.0, None).unwrap();
        assert!((q10.gamma_a * 10.0 - p.gamma_a).abs() < 1e-12);
        assert!(PhysicalParams { mass_a: 0.0, ..phys }.to_system(1.0, None).is_err());
    }

    #[test]
    fn regime_warnings() {
        assert!(validate_regime(&cold_bath()).is_empty());
        let mut big = cold_bath();
        big.nbar_a = 1e5;
        assert!(validate_regime(&big).is_empty());
        big.nbar_a = 1e13;
        let w = validate_regime(&big);
        assert!(w.iter().any(|w| matches!(w, RegimeWarning::RotatingWave { .. })));
        let mut fast = cold_bath();
        fast.gamma_spin = fast.omega_z;
        let w = validate_regime(&fast);
        assert_eq!(w.len(), 1);
        assert!(matches!(w[0], RegimeWarning::TimescaleSeparation { .. }));
    }

    #[test]
    fn params_validation() {
        assert!(cold_bath().validate().is_ok());
        let mut p = cold_bath();
        p.gamma_b = -1.0;
        assert!(p.validate().is_err());
        p = cold_bath();
        p.omega_z = 0.0;
        assert!(p.validate().is_err());
        assert!(generic().check_resonance().is_err());
        assert!(cold_bath().check_resonance().is_ok());
    }
}
