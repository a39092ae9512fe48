//! Operator algebra on the truncated spin ⊗ mode a ⊗ mode b space.
//!
//! Basis order is fixed as spin ⊗ a ⊗ b with b fastest-varying. Spin index 0
//! is the NV ground level `|0⟩` (the state the laser resets to) and index 1 the
//! excited level `|−1⟩`; `σ₋` maps 1 → 0 and `σ_z = diag(−1, +1)`.

mod matrix;
mod sparse;
mod state;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use matrix::{kron, ComplexMatrix};
pub(crate) use sparse::Csr;
pub use sparse::SparseOperator;
pub use state::{expectation, partial_trace, thermal_state, DensityMatrix};
pub(crate) use state::min_eigenvalue;
#[cfg(test)]
pub(crate) use state::expectation_dense;

use crate::{Error, Result};

/// A tensor factor of the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    Spin,
    ModeA,
    ModeB,
}

/// Ordered tensor factors and their truncation dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceLayout {
    slots: Vec<(Slot, usize)>,
}

impl SpaceLayout {
    /// spin ⊗ a ⊗ b.
    pub fn full(dim_a: usize, dim_b: usize) -> Result<Self> {
        Self::new(vec![(Slot::Spin, 2), (Slot::ModeA, dim_a), (Slot::ModeB, dim_b)])
    }

    /// spin ⊗ b, the space left after eliminating mode a.
    pub fn reduced(dim_b: usize) -> Result<Self> {
        Self::new(vec![(Slot::Spin, 2), (Slot::ModeB, dim_b)])
    }

    /// Slots must appear in canonical order (spin, a, b), each at most once.
    pub fn new(slots: Vec<(Slot, usize)>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::EmptySelection);
        }
        if !slots.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::InvalidDimension(format!("slots out of canonical order: {slots:?}")));
        }
        for &(slot, dim) in &slots {
            match slot {
                Slot::Spin if dim != 2 => {
                    return Err(Error::InvalidDimension(format!("spin dimension must be 2, got {dim}")))
                }
                Slot::ModeA | Slot::ModeB if dim < 2 => {
                    return Err(Error::InvalidDimension(format!("{slot:?} dimension must be ≥ 2, got {dim}")))
                }
                _ => {}
            }
        }
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[(Slot, usize)] {
        &self.slots
    }

    pub fn dim(&self) -> usize {
        self.slots.iter().map(|s| s.1).product()
    }

    pub fn contains(&self, slot: Slot) -> bool {
        self.position(slot).is_some()
    }

    pub fn position(&self, slot: Slot) -> Option<usize> {
        self.slots.iter().position(|s| s.0 == slot)
    }

    pub fn slot_dim(&self, slot: Slot) -> Result<usize> {
        self.position(slot).map(|p| self.slots[p].1).ok_or(Error::MissingSlot(slot))
    }

    /// Distance in the flat index between consecutive levels of `slot`.
    pub fn stride(&self, slot: Slot) -> Result<usize> {
        let p = self.position(slot).ok_or(Error::MissingSlot(slot))?;
        Ok(self.slots[p + 1..].iter().map(|s| s.1).product())
    }

    /// Level of `slot` in the basis state with flat index `index`.
    pub fn level(&self, index: usize, slot: Slot) -> Result<usize> {
        Ok((index / self.stride(slot)?) % self.slot_dim(slot)?)
    }
}

/// Bosonic lowering operator on levels `0..dim`: `a[n−1, n] = √n`.
pub fn annihilation(dim: usize) -> Result<SparseOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("ladder operator needs dim ≥ 2, got {dim}")));
    }
    SparseOperator::from_triplets(dim, (1..dim).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))))
}

pub fn creation(dim: usize) -> Result<SparseOperator> {
    Ok(annihilation(dim)?.adjoint())
}

/// `a†a = diag(0, 1, …, dim−1)`.
pub fn number(dim: usize) -> Result<SparseOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("number operator needs dim ≥ 2, got {dim}")));
    }
    Ok(SparseOperator::from_real_diagonal(&(0..dim).map(|n| n as f64).collect::<Vec<_>>()))
}

/// `σ₋ = |0⟩⟨−1|`, lowering the excited level (index 1) to the ground level.
pub fn sigma_minus() -> SparseOperator {
    SparseOperator::from_triplets(2, [(0, 1, C64::new(1.0, 0.0))]).expect("2x2")
}

pub fn sigma_plus() -> SparseOperator {
    sigma_minus().adjoint()
}

pub fn sigma_z() -> SparseOperator {
    SparseOperator::from_real_diagonal(&[-1.0, 1.0])
}

pub fn sigma_x() -> SparseOperator {
    sigma_minus().add(&sigma_plus()).expect("2x2")
}

/// Lift an operator on one tensor factor to the whole layout.
pub fn embed(op: &SparseOperator, slot: Slot, layout: &SpaceLayout) -> Result<SparseOperator> {
    let dim = layout.slot_dim(slot)?;
    if op.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
    }
    let mut out: Option<SparseOperator> = None;
    for &(s, d) in layout.slots() {
        let factor = if s == slot { op.clone() } else { SparseOperator::identity(d) };
        out = Some(match out {
            None => factor,
            Some(acc) => acc.kron(&factor),
        });
    }
    Ok(out.expect("layout is non-empty"))
}

/// Kronecker product of per-slot factors taken in layout order.
pub fn product_operator(layout: &SpaceLayout, factors: &[(Slot, SparseOperator)]) -> Result<SparseOperator> {
    let mut out = SparseOperator::identity(layout.dim());
    for (slot, op) in factors {
        out = out.mul(&embed(op, *slot, layout)?)?;
    }
    Ok(out)
}
