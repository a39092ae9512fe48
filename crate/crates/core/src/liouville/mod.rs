//! Lindblad right-hand side, its adjoint, and fixed-step RK4 propagation.
//!
//! The dissipator convention is `D_x(ρ) = 2xρx† − x†xρ − ρx†x`, so a term of
//! weight `w` contributes `w·D_x(ρ)` and a decaying two-level system relaxes
//! as `e^{−2wt}`.
//!
//! Two interchangeable generators drive the integrator:
//!
//! * [`Liouvillian`] applies the right-hand side to a dense `ρ` through
//!   sparse × dense products. It is the reference path.
//! * [`SectorLiouvillian`] exploits a conserved charge (total phonon number for
//!   the full model) and keeps only the diagonal blocks of `ρ`, which is all a
//!   block-diagonal initial state can ever populate.

mod integrate;
mod sector;
mod steady;

use num_complex::Complex64 as C64;

use crate::hilbert::{ComplexMatrix, DensityMatrix, SparseOperator};
use crate::model::LindbladTerm;
use crate::par::Exec;
use crate::{Error, Result};

pub use integrate::{
    evolve, evolve_with, rk4_step, steady_state_reached, Engine, EvolveOptions, Evolution, IntegratorSpec, Stationarity,
    Trajectory,
};
pub use sector::{BlockState, SectorLiouvillian, Sectors};
pub use steady::stationary_populations;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `D_x(ρ) = 2xρx† − x†xρ − ρx†x`
pub fn dissipator(x: &SparseOperator, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_dim(x.dim(), rho.rows())?;
    let xdx = x.adjoint().mul(x)?;
    let jump = x.dense_mul_adjoint(&x.mul_dense(rho, Exec::Serial)?, Exec::Serial)?;
    let left = xdx.mul_dense(rho, Exec::Serial)?;
    let right = xdx.dense_mul_adjoint(rho, Exec::Serial)?;
    let mut out = jump.scaled(C64::new(2.0, 0.0));
    out.axpy(-C64::new(1.0, 0.0), &left);
    out.axpy(-C64::new(1.0, 0.0), &right);
    Ok(out)
}

/// Heisenberg-picture form `D†_x(O) = 2x†Ox − x†xO − Ox†x`.
pub fn adjoint_dissipator(x: &SparseOperator, op: &SparseOperator) -> Result<ComplexMatrix> {
    check_dim(x.dim(), op.dim())?;
    let xd = x.adjoint();
    let xdx = xd.mul(x)?;
    let jump = xd.mul(op)?.mul(x)?.scaled(C64::new(2.0, 0.0));
    Ok(jump.sub(&xdx.mul(op)?)?.sub(&op.mul(&xdx)?)?.to_dense())
}

/// `−i[H, ρ] + Σ_k w_k D_{x_k}(ρ)`
pub fn lindblad_rhs(rho: &DensityMatrix, h: &SparseOperator, terms: &[LindbladTerm]) -> Result<ComplexMatrix> {
    Liouvillian::new(h, terms)?.apply(rho.matrix(), Exec::Serial)
}

/// Dense-state generator built from sparse operators.
///
/// Stored as the effective Hamiltonian `H_eff = H − iΣ w x†x` plus the jump
/// operators, so `L(ρ) = −i(H_eff ρ − ρ H_eff†) + Σ 2w xρx†`.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    dim: usize,
    hamiltonian: SparseOperator,
    h_eff: SparseOperator,
    jumps: Vec<(f64, SparseOperator)>,
}

impl Liouvillian {
    pub fn new(h: &SparseOperator, terms: &[LindbladTerm]) -> Result<Self> {
        let dim = h.dim();
        let mut h_eff = h.clone();
        let mut jumps = Vec::new();
        for t in terms {
            check_dim(dim, t.operator.dim())?;
            if t.weight == 0.0 {
                continue;
            }
            let xdx = t.operator.adjoint().mul(&t.operator)?;
            h_eff = h_eff.sub(&xdx.scaled(C64::new(0.0, t.weight)))?;
            jumps.push((t.weight, t.operator.clone()));
        }
        Ok(Self { dim, hamiltonian: h.clone(), h_eff, jumps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, m: &ComplexMatrix) -> Result<()> {
        if !m.is_square() {
            return Err(Error::InvalidDimension(format!("{}x{} operand", m.rows(), m.cols())));
        }
        check_dim(self.dim, m.rows())
    }

    fn add_jumps(&self, rho: &[C64], out: &mut [C64], exec: Exec) {
        let n = self.dim;
        let mut y = vec![ZERO; n * n];
        let mut z = vec![ZERO; n * n];
        for (w, x) in &self.jumps {
            x.csr().mul_dense_into(rho, n, &mut y, exec);
            x.csr().dense_mul_adjoint_into(&y, n, &mut z, exec);
            let s = 2.0 * w;
            for (o, v) in out.iter_mut().zip(&z) {
                *o += s * v;
            }
        }
    }

    /// `L(ρ)` for an arbitrary square `ρ`.
    pub fn apply(&self, rho: &ComplexMatrix, exec: Exec) -> Result<ComplexMatrix> {
        self.check(rho)?;
        let n = self.dim;
        let mut left = vec![ZERO; n * n];
        let mut right = vec![ZERO; n * n];
        self.h_eff.csr().mul_dense_into(rho.as_slice(), n, &mut left, exec);
        self.h_eff.csr().dense_mul_adjoint_into(rho.as_slice(), n, &mut right, exec);
        let mut out: Vec<C64> = left.iter().zip(&right).map(|(l, r)| -I * (l - r)).collect();
        self.add_jumps(rho.as_slice(), &mut out, exec);
        ComplexMatrix::from_vec(n, n, out)
    }

    /// `L(ρ)` for Hermitian `ρ`; the output is exactly Hermitian.
    pub fn apply_hermitian(&self, rho: &ComplexMatrix, exec: Exec) -> Result<ComplexMatrix> {
        self.check(rho)?;
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        self.apply_hermitian_into(rho.as_slice(), out.as_mut_slice(), exec);
        Ok(out)
    }

    pub(crate) fn apply_hermitian_into(&self, rho: &[C64], out: &mut [C64], exec: Exec) {
        let n = self.dim;
        let mut k = vec![ZERO; n * n];
        self.h_eff.csr().mul_dense_into(rho, n, &mut k, exec);
        anti_hermitian_part(&k, n, out);
        self.add_jumps(rho, out, exec);
    }

    /// Heisenberg-picture generator
    /// `L†(O) = i[H, O] + Σ w D†_x(O) = i H_eff† O − i O H_eff + Σ 2w x†Ox`.
    pub fn adjoint_apply(&self, op: &ComplexMatrix, exec: Exec) -> Result<ComplexMatrix> {
        self.check(op)?;
        let h_eff_dag = self.h_eff.adjoint();
        let left = h_eff_dag.mul_dense(op, exec)?;
        let right = h_eff_dag.dense_mul_adjoint(op, exec)?;
        let mut out = (&left - &right).scaled(I);
        for (w, x) in &self.jumps {
            let xd = x.adjoint();
            let xdox = xd.dense_mul_adjoint(&xd.mul_dense(op, exec)?, exec)?;
            out.axpy(C64::new(2.0 * w, 0.0), &xdox);
        }
        Ok(out)
    }

    pub fn hamiltonian(&self) -> &SparseOperator {
        &self.hamiltonian
    }
}

/// `out = −i(K − K†)` for square row-major `k`.
pub(crate) fn anti_hermitian_part(k: &[C64], n: usize, out: &mut [C64]) {
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = -I * (k[i * n + j] - k[j * n + i].conj());
        }
    }
}

#[cfg(test)]
mod tests;
