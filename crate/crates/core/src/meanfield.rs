//! Factorized number-operator dynamics and their closed-form stationary
//! solution.
//!
//! With `⟨n_b n_s⟩ ≈ ⟨n_b⟩⟨n_s⟩` the reduced model closes on two numbers. The
//! stationary `⟨n_b⟩` is the nonnegative root of `A x² + B x + C = 0`, and as
//! `n̄_a → ∞` it approaches a limit depending only on `n̄_b` and `Γ/γ_b`.

use std::fmt;

use serde::Serialize;

use crate::liouville::IntegratorSpec;
use crate::reduced::ReducedParams;
use crate::{Error, Result};

/// Mean spin excitation and mode-b occupation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanFieldState {
    pub n_s: f64,
    pub n_b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticCoeffs {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }
}

/// `(dn_s/dt, dn_b/dt)`
pub fn mean_field_rhs(state: &MeanFieldState, p: &ReducedParams) -> (f64, f64) {
    let k = 2.0 * p.exchange_rate();
    let heat = p.spin_heating_rate();
    let (ns, nb, na) = (state.n_s, state.n_b, p.nbar_a);
    let exchange = (2.0 * na + 1.0) * nb * ns + na * ns - (na + 1.0) * nb;
    let dns = -k * exchange + 2.0 * (heat - (p.gamma_spin + 2.0 * heat) * ns);
    let dnb = k * exchange + 2.0 * p.gamma_b * (p.nbar_b - nb);
    (dns, dnb)
}

const RANGE_SLACK: f64 = 1e-9;

/// RK4 integration of [`mean_field_rhs`], recording `(t, state)` every
/// `record_stride` steps and at the end.
pub fn evolve_mean_field(initial: MeanFieldState, p: &ReducedParams, spec: &IntegratorSpec) -> Result<Vec<(f64, MeanFieldState)>> {
    spec.validate()?;
    p.validate()?;
    let f = |s: &MeanFieldState| mean_field_rhs(s, p);
    let shift = |s: &MeanFieldState, d: (f64, f64), h: f64| MeanFieldState { n_s: s.n_s + h * d.0, n_b: s.n_b + h * d.1 };
    let dt = spec.dt;
    let n_steps = spec.n_steps();
    let mut out = vec![(0.0, initial)];
    let mut y = initial;
    for step in 1..=n_steps {
        let k1 = f(&y);
        let k2 = f(&shift(&y, k1, dt / 2.0));
        let k3 = f(&shift(&y, k2, dt / 2.0));
        let k4 = f(&shift(&y, k3, dt));
        y = MeanFieldState {
            n_s: y.n_s + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            n_b: y.n_b + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        };
        let time = step as f64 * dt;
        if !(y.n_b >= -RANGE_SLACK) || !(y.n_s >= -RANGE_SLACK) || !(y.n_s <= 1.0 + RANGE_SLACK) {
            return Err(Error::ModelViolation { time, reason: format!("n_s = {}, n_b = {}", y.n_s, y.n_b) });
        }
        if step % spec.record_stride == 0 || step == n_steps {
            out.push((time, y));
        }
    }
    Ok(out)
}

/// Coefficients of the stationary quadratic for `⟨n_b⟩`.
pub fn quadratic_coeffs(p: &ReducedParams) -> QuadraticCoeffs {
    let g = p.exchange_rate();
    let s = p.spin_heating_rate();
    let (na, nb, gb, gs) = (p.nbar_a, p.nbar_b, p.gamma_b, p.gamma_spin);
    QuadraticCoeffs {
        a: -gb * g * (2.0 * na + 1.0),
        b: g * (2.0 * na * nb * gb + nb * gb - na * gb - gs * na - s - gs) - gb * (gs + 2.0 * s),
        c: g * na * (gb * nb + s) + gb * nb * (gs + 2.0 * s),
    }
}

/// Roots of `a x² + b x + c` without cancellation; `None` when degenerate.
fn stable_roots(q: &QuadraticCoeffs) -> Option<(f64, f64)> {
    let disc = q.discriminant().max(0.0);
    let t = -0.5 * (q.b + q.b.signum() * disc.sqrt());
    if t == 0.0 || q.a == 0.0 {
        return None;
    }
    Some((t / q.a, q.c / t))
}

/// The nonnegative root of the stationary quadratic.
pub fn stationary_nb(p: &ReducedParams) -> Result<f64> {
    p.validate()?;
    let q = quadratic_coeffs(p);
    if q.a == 0.0 {
        if q.b == 0.0 {
            return Err(Error::NumericalConsistency("stationary quadratic is degenerate (A = B = 0)".into()));
        }
        return Ok((-q.c / q.b).max(0.0));
    }
    let (r1, r2) = stable_roots(&q).ok_or_else(|| Error::NumericalConsistency(format!("degenerate quadratic {q:?}")))?;
    let scale = q.c.abs().max(q.b.abs()).max(1.0);
    let tiny = 1e-14 * scale / q.b.abs().max(f64::MIN_POSITIVE);
    let physical: Vec<f64> = [r1, r2].into_iter().filter(|r| r.is_finite() && *r >= -tiny).collect();
    match physical.as_slice() {
        [r] => Ok(r.max(0.0)),
        [a, b] => Ok(a.min(*b).max(0.0)),
        _ => Err(Error::NumericalConsistency(format!("no nonnegative stationary root for {q:?}"))),
    }
}

/// Stationary `⟨n_s⟩` given `⟨n_b⟩`, from `dn_s/dt = 0`.
pub fn stationary_ns(p: &ReducedParams, n_b: f64) -> f64 {
    let g = p.exchange_rate();
    let s = p.spin_heating_rate();
    let na = p.nbar_a;
    let num = g * (na + 1.0) * n_b + s;
    let den = g * ((2.0 * na + 1.0) * n_b + na) + p.gamma_spin + 2.0 * s;
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn stationary_state(p: &ReducedParams) -> Result<MeanFieldState> {
    let n_b = stationary_nb(p)?;
    Ok(MeanFieldState { n_s: stationary_ns(p, n_b), n_b })
}

/// `n̄_a → ∞` limit `½(c + √(c² + 2n̄_b))` with `c = n̄_b − (γ_b+Γ)/(2γ_b)`.
pub fn asymptotic_nb(nbar_b: f64, gamma_b: f64, gamma_spin: f64) -> Result<f64> {
    if !(gamma_b > 0.0) {
        return Err(Error::InvalidValue { name: "gamma_b", reason: "must be > 0".into() });
    }
    if !(nbar_b >= 0.0) || !(gamma_spin >= 0.0) {
        return Err(Error::InvalidValue { name: "asymptotic_nb", reason: "nbar_b and Gamma must be ≥ 0".into() });
    }
    let c = nbar_b - (gamma_b + gamma_spin) / (2.0 * gamma_b);
    let root = (c * c + 2.0 * nbar_b).sqrt();
    if c >= 0.0 {
        Ok(0.5 * (c + root))
    } else if root - c == 0.0 {
        Ok(0.0)
    } else {
        Ok(nbar_b / (root - c))
    }
}

/// Smallest `Γ` reaching `⟨n_b⟩ < 1` as `n̄_a → ∞`: `3γ_b(n̄_b − 1)`, or 0.
pub fn cooling_threshold(nbar_b: f64, gamma_b: f64) -> f64 {
    (3.0 * gamma_b * (nbar_b - 1.0)).max(0.0)
}

/// Why an optimum should be read with care.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum OptimumWarning {
    /// `⟨n_b⟩` does not depend on `Γ` within rounding.
    FlatProfile,
    /// More than one local minimum on the coarse grid.
    NonUnimodal { local_minima: usize },
}

impl fmt::Display for OptimumWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FlatProfile => write!(f, "stationary n_b does not depend on Gamma; returning the range minimum"),
            Self::NonUnimodal { local_minima } => {
                write!(f, "profile has {local_minima} local minima on the coarse grid; returning the global one")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaOptimum {
    pub gamma: f64,
    pub n_b: f64,
    pub warning: Option<OptimumWarning>,
}

const COARSE_POINTS: usize = 65;
const GAMMA_REL_TOL: f64 = 1e-4;

/// Spin decay rate in `[lo, hi]` minimizing the stationary `⟨n_b⟩`.
///
/// A log-spaced coarse grid checks unimodality and brackets the minimum, then
/// golden-section search on `ln Γ` refines it to relative tolerance 1e-4.
pub fn optimal_gamma(p: &ReducedParams, (lo, hi): (f64, f64)) -> Result<GammaOptimum> {
    if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(Error::InvalidValue { name: "gamma_range", reason: format!("[{lo}, {hi}] must be positive and finite") });
    }
    let eval = |g: f64| {
        let mut q = *p;
        q.gamma_spin = g;
        stationary_nb(&q)
    };
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let grid: Vec<f64> =
        (0..COARSE_POINTS).map(|k| (ln_lo + (ln_hi - ln_lo) * k as f64 / (COARSE_POINTS - 1) as f64).exp()).collect();
    let values = grid.iter().map(|&g| eval(g)).collect::<Result<Vec<_>>>()?;

    let (vmin, vmax) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if vmax - vmin <= 1e-12 * vmax.abs().max(1e-300) {
        return Ok(GammaOptimum { gamma: lo, n_b: values[0], warning: Some(OptimumWarning::FlatProfile) });
    }
    // first index of the global minimum keeps ties toward smaller Γ
    let best = values.iter().position(|&v| v == vmin).expect("minimum exists");
    let local_minima = (0..values.len())
        .filter(|&k| {
            let left = k == 0 || values[k] < values[k - 1];
            let right = k + 1 == values.len() || values[k] <= values[k + 1];
            left && right
        })
        .count();
    let warning = (local_minima > 1).then_some(OptimumWarning::NonUnimodal { local_minima });

    let mut a = grid[best.saturating_sub(1)].ln();
    let mut b = grid[(best + 1).min(grid.len() - 1)].ln();
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (eval(x1.exp())?, eval(x2.exp())?);
    while b - a > GAMMA_REL_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = eval(x1.exp())?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = eval(x2.exp())?;
        }
    }
    let g = (0.5 * (a + b)).exp();
    let v = eval(g)?;
    let (gamma, n_b) = if v <= vmin { (g, v) } else { (grid[best], vmin) };
    Ok(GammaOptimum { gamma, n_b, warning })
}

/// Heating-bath occupation at which the stationary `⟨n_b⟩` drops to `target`,
/// found by bisection on `[lo, hi]`. `None` if not bracketed.
pub fn heating_for_target(p: &ReducedParams, target: f64, (lo, hi): (f64, f64)) -> Result<Option<f64>> {
    let f = |na: f64| {
        let mut q = *p;
        q.nbar_a = na;
        stationary_nb(&q).map(|v| v - target)
    };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(Some(a));
    }
    if fa.signum() == fb.signum() {
        return Ok(None);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m)?.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Some(0.5 * (a + b)))
}
