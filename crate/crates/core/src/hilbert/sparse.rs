use num_complex::Complex64 as C64;

use super::ComplexMatrix;
use crate::par::{self, Exec};
use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Rectangular compressed-sparse-row storage.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Csr {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    /// Duplicate `(row, col)` entries are summed; exact zeros are dropped.
    pub(crate) fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(r, c, _) in &t {
            if r >= rows || c >= cols {
                return Err(Error::IndexOutOfBounds { row: r, col: c, dim: rows.max(cols) });
            }
        }
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != ZERO);

        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx: merged.iter().map(|t| t.1).collect(),
            vals: merged.iter().map(|t| t.2).collect(),
        })
    }

    pub(crate) fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub(crate) fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// `out = self · m`, with `m` row-major of shape `cols × m_cols`.
    pub(crate) fn mul_dense_into(&self, m: &[C64], m_cols: usize, out: &mut [C64], exec: Exec) {
        debug_assert_eq!(m.len(), self.cols * m_cols);
        debug_assert_eq!(out.len(), self.rows * m_cols);
        par::for_each_chunk(exec, out, m_cols, |i, dst| {
            dst.fill(ZERO);
            for (k, v) in self.row(i) {
                let src = &m[k * m_cols..(k + 1) * m_cols];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        });
    }

    /// `out = m · self†`, with `m` row-major of shape `m_rows × cols`.
    pub(crate) fn dense_mul_adjoint_into(&self, m: &[C64], m_rows: usize, out: &mut [C64], exec: Exec) {
        debug_assert_eq!(m.len(), m_rows * self.cols);
        debug_assert_eq!(out.len(), m_rows * self.rows);
        let (inner, n_out) = (self.cols, self.rows);
        par::for_each_chunk(exec, out, n_out, |i, dst| {
            let src = &m[i * inner..(i + 1) * inner];
            for (j, d) in dst.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (k, v) in self.row(j) {
                    acc += src[k] * v.conj();
                }
                *d = acc;
            }
        });
    }
}

/// Square sparse operator on a truncated Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    csr: Csr,
}

impl SparseOperator {
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("operator dimension must be positive".into()));
        }
        Ok(Self { csr: Csr::from_triplets(dim, dim, triplets)? })
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_triplets(dim, std::iter::empty()).expect("valid empty operator")
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_real_diagonal(&vec![1.0; dim])
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &d)| (i, i, C64::new(d, 0.0))))
            .expect("diagonal entries are in bounds")
    }

    pub fn from_dense(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.rows(), found: m.cols() });
        }
        let n = m.rows();
        Self::from_triplets(n, (0..n).flat_map(|i| (0..n).map(move |j| (i, j, m[(i, j)]))))
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.csr.triplets() {
            out[(i, j)] = v;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.csr.rows
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    pub(crate) fn csr(&self) -> &Csr {
        &self.csr
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.csr.triplets()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.csr.row(i)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i).find(|&(c, _)| c == j).map_or(ZERO, |(_, v)| v)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim(), self.triplets().map(|(i, j, v)| (j, i, v.conj())))
            .expect("transpose stays in bounds")
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self::from_triplets(self.dim(), self.triplets().map(|(i, j, v)| (i, j, v * s)))
            .expect("scaling stays in bounds")
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim() != other {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        Self::from_triplets(self.dim(), self.triplets().chain(other.triplets()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(C64::new(-1.0, 0.0)))
    }

    /// Sparse product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        let n = self.dim();
        let mut acc = vec![ZERO; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut out = Vec::new();
        for i in 0..n {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if acc[j] == ZERO {
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                out.push((i, j, acc[j]));
                acc[j] = ZERO;
            }
            touched.clear();
        }
        Self::from_triplets(n, out)
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Sparse Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let m = other.dim();
        let t = self
            .triplets()
            .flat_map(|(i, j, a)| other.triplets().map(move |(k, l, b)| (i * m + k, j * m + l, a * b)))
            .collect::<Vec<_>>();
        Self::from_triplets(self.dim() * m, t).expect("kron stays in bounds")
    }

    /// Dense product `self · m`.
    pub fn mul_dense(&self, m: &ComplexMatrix, exec: Exec) -> Result<ComplexMatrix> {
        self.check_dim(m.rows())?;
        let mut out = ComplexMatrix::zeros(self.dim(), m.cols());
        self.csr.mul_dense_into(m.as_slice(), m.cols(), out.as_mut_slice(), exec);
        Ok(out)
    }

    /// Dense product `m · self†`.
    pub fn dense_mul_adjoint(&self, m: &ComplexMatrix, exec: Exec) -> Result<ComplexMatrix> {
        self.check_dim(m.cols())?;
        let mut out = ComplexMatrix::zeros(m.rows(), self.dim());
        self.csr.dense_mul_adjoint_into(m.as_slice(), m.rows(), out.as_mut_slice(), exec);
        Ok(out)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.triplets().all(|(i, j, v)| (v - self.get(j, i).conj()).norm() <= tol)
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(i, j, _)| i == j)
    }

    /// At most one nonzero per row and per column.
    pub fn is_monomial(&self) -> bool {
        let mut col_seen = vec![false; self.dim()];
        for i in 0..self.dim() {
            let mut count = 0;
            for (j, _) in self.row(i) {
                count += 1;
                if std::mem::replace(&mut col_seen[j], true) {
                    return false;
                }
            }
            if count > 1 {
                return false;
            }
        }
        true
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        match self.sub(other) {
            Ok(d) => d.triplets().map(|(_, _, v)| v.norm()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    }
}
