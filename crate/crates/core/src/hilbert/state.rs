use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{kron, ComplexMatrix, Slot, SpaceLayout, SparseOperator};
use crate::{Error, Result};

const TRACE_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-10;
const IMAG_TOL: f64 = 1e-8;

/// Unit-trace Hermitian state on a [`SpaceLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    layout: SpaceLayout,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(layout: SpaceLayout, matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), found: matrix.rows() });
        }
        let tr = matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::NumericalConsistency(format!("density matrix trace {tr}")));
        }
        let herm = matrix.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::NumericalConsistency(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        Ok(Self { layout, matrix })
    }

    pub(crate) fn new_unchecked(layout: SpaceLayout, matrix: ComplexMatrix) -> Self {
        Self { layout, matrix }
    }

    /// Product state from one factor per slot, in layout order.
    pub fn product(layout: &SpaceLayout, factors: &[ComplexMatrix]) -> Result<Self> {
        if factors.len() != layout.slots().len() {
            return Err(Error::DimensionMismatch { expected: layout.slots().len(), found: factors.len() });
        }
        let mut acc: Option<ComplexMatrix> = None;
        for (f, &(_, d)) in factors.iter().zip(layout.slots()) {
            if f.rows() != d || !f.is_square() {
                return Err(Error::DimensionMismatch { expected: d, found: f.rows() });
            }
            acc = Some(match acc {
                None => f.clone(),
                Some(a) => kron(&a, f),
            });
        }
        Self::new(layout.clone(), acc.expect("non-empty layout"))
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Smallest eigenvalue. The matrix is split into the connected components
    /// of its nonzero pattern first, so block-diagonal states are cheap.
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }
}

pub(crate) fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    let n = m.rows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if m[(i, j)] != C64::new(0.0, 0.0) || m[(j, i)] != C64::new(0.0, 0.0) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups
        .values()
        .map(|idx| hermitian_min_eigenvalue(&ComplexMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])))
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn hermitian_min_eigenvalue(m: &ComplexMatrix) -> f64 {
    if m.rows() == 1 {
        return m[(0, 0)].re;
    }
    let n = m.rows();
    let dm = DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
    dm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Thermal occupation distribution of one mode, renormalized over the
/// truncated levels: `p_n ∝ (n̄/(1+n̄))ⁿ`.
pub fn thermal_state(dim: usize, nbar: f64) -> Result<ComplexMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension("thermal state needs dim ≥ 1".into()));
    }
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::InvalidValue { name: "nbar", reason: format!("must be finite and ≥ 0, got {nbar}") });
    }
    let ratio = nbar / (1.0 + nbar);
    let weights: Vec<f64> = (0..dim).map(|n| ratio.powi(n as i32)).collect();
    let z: f64 = weights.iter().sum();
    Ok(ComplexMatrix::from_real_diagonal(&weights.iter().map(|w| w / z).collect::<Vec<_>>()))
}

/// `Re tr(op · ρ)` for a Hermitian observable.
pub fn expectation(rho: &DensityMatrix, op: &SparseOperator) -> Result<f64> {
    expectation_dense(rho.matrix(), op)
}

pub(crate) fn expectation_dense(rho: &ComplexMatrix, op: &SparseOperator) -> Result<f64> {
    if op.dim() != rho.rows() {
        return Err(Error::DimensionMismatch { expected: rho.rows(), found: op.dim() });
    }
    let tr: C64 = op.triplets().map(|(i, j, v)| v * rho[(j, i)]).sum();
    if tr.im.abs() > IMAG_TOL {
        return Err(Error::NumericalConsistency(format!("expectation has imaginary part {:e}", tr.im)));
    }
    Ok(tr.re)
}

/// Reduced state on the `keep` slots, in their layout order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[Slot]) -> Result<ComplexMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptySelection);
    }
    let layout = rho.layout();
    for &s in keep {
        layout.slot_dim(s)?;
    }
    let n = layout.dim();
    let mut kept_index = vec![0usize; n];
    let mut traced_index = vec![0usize; n];
    let mut kept_dim = 1usize;
    for i in 0..n {
        let (mut k, mut t) = (0usize, 0usize);
        for &(slot, d) in layout.slots() {
            let level = layout.level(i, slot)?;
            if keep.contains(&slot) {
                k = k * d + level;
            } else {
                t = t * d + level;
            }
        }
        kept_index[i] = k;
        traced_index[i] = t;
    }
    for &(slot, d) in layout.slots() {
        if keep.contains(&slot) {
            kept_dim *= d;
        }
    }
    let m = rho.matrix();
    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    for i in 0..n {
        for j in 0..n {
            if traced_index[i] == traced_index[j] {
                out[(kept_index[i], kept_index[j])] += m[(i, j)];
            }
        }
    }
    Ok(out)
}
