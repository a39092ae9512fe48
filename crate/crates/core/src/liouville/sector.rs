use num_complex::Complex64 as C64;

use super::{anti_hermitian_part, check_dim, ZERO};
use crate::hilbert::{min_eigenvalue, ComplexMatrix, Csr, SparseOperator};
use crate::model::LindbladTerm;
use crate::par::{self, Exec};
use crate::{Error, Result};

/// Off-block entries of a supposedly block-diagonal matrix above this are
/// rejected.
const BLOCK_TOL: f64 = 1e-12;

/// Partition of the basis into blocks of equal conserved charge.
#[derive(Clone, Debug, PartialEq)]
pub struct Sectors {
    charges: Vec<i64>,
    block_of: Vec<usize>,
    local: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Sectors {
    /// One block per distinct value of `charge`, ordered by charge.
    pub fn from_charge(charge: &[i64]) -> Result<Self> {
        if charge.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut charges = charge.to_vec();
        charges.sort_unstable();
        charges.dedup();
        let mut members = vec![Vec::new(); charges.len()];
        let mut block_of = Vec::with_capacity(charge.len());
        let mut local = Vec::with_capacity(charge.len());
        for (i, q) in charge.iter().enumerate() {
            let b = charges.binary_search(q).expect("charge is present");
            block_of.push(b);
            local.push(members[b].len());
            members[b].push(i);
        }
        Ok(Self { charges, block_of, local, members })
    }

    /// The trivial partition: everything in one block.
    pub fn single(dim: usize) -> Result<Self> {
        Self::from_charge(&vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.block_of.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.members.len()
    }

    pub fn block_dim(&self, b: usize) -> usize {
        self.members[b].len()
    }

    pub fn charge(&self, b: usize) -> i64 {
        self.charges[b]
    }

    pub fn members(&self, b: usize) -> &[usize] {
        &self.members[b]
    }

    /// Block and position within it of a global basis index.
    pub fn locate(&self, i: usize) -> (usize, usize) {
        (self.block_of[i], self.local[i])
    }

    /// Number of stored complex entries of a block-diagonal matrix.
    pub fn stored_entries(&self) -> usize {
        self.members.iter().map(|m| m.len() * m.len()).sum()
    }

    fn block_by_charge(&self, q: i64) -> Option<usize> {
        self.charges.binary_search(&q).ok()
    }

    /// Restrict an operator to entries inside diagonal blocks, in local
    /// coordinates.
    pub(crate) fn split_diagonal(&self, op: &SparseOperator) -> Vec<Vec<(usize, usize, C64)>> {
        let mut out = vec![Vec::new(); self.n_blocks()];
        for (i, j, v) in op.triplets() {
            let (bi, li) = self.locate(i);
            let (bj, lj) = self.locate(j);
            if bi == bj {
                out[bi].push((li, lj, v));
            }
        }
        out
    }
}

/// Diagonal blocks of a block-diagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockState {
    blocks: Vec<ComplexMatrix>,
}

impl BlockState {
    pub fn zeros(sectors: &Sectors) -> Self {
        Self { blocks: (0..sectors.n_blocks()).map(|b| ComplexMatrix::zeros(sectors.block_dim(b), sectors.block_dim(b))).collect() }
    }

    /// Fails with [`Error::SymmetryViolation`] if `m` has weight between blocks.
    pub fn from_dense(sectors: &Sectors, m: &ComplexMatrix) -> Result<Self> {
        check_dim(sectors.dim(), m.rows())?;
        check_dim(sectors.dim(), m.cols())?;
        let mut out = Self::zeros(sectors);
        for i in 0..m.rows() {
            let (bi, li) = sectors.locate(i);
            for j in 0..m.cols() {
                let (bj, lj) = sectors.locate(j);
                let v = m[(i, j)];
                if bi == bj {
                    out.blocks[bi][(li, lj)] = v;
                } else if v.norm() > BLOCK_TOL {
                    return Err(Error::SymmetryViolation(format!(
                        "state couples charge {} and {} (entry {i},{j} = {v})",
                        sectors.charge(bi),
                        sectors.charge(bj)
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self, sectors: &Sectors) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(sectors.dim(), sectors.dim());
        for (b, block) in self.blocks.iter().enumerate() {
            let idx = sectors.members(b);
            for (a, &i) in idx.iter().enumerate() {
                for (c, &j) in idx.iter().enumerate() {
                    out[(i, j)] = block[(a, c)];
                }
            }
        }
        out
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [ComplexMatrix] {
        &mut self.blocks
    }

    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    /// Average each block with its adjoint; returns the largest change.
    pub fn hermitize(&mut self) -> f64 {
        self.blocks.iter_mut().map(|b| b.hermitize()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.as_slice().iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// `self = base + alpha * dir`, block by block.
    pub(crate) fn assign_axpy(&mut self, base: &Self, alpha: f64, dir: &Self, exec: Exec) {
        par::for_each_mut(exec, &mut self.blocks, |b, out| {
            for ((o, &x), &d) in out.as_mut_slice().iter_mut().zip(base.blocks[b].as_slice()).zip(dir.blocks[b].as_slice()) {
                *o = x + alpha * d;
            }
        });
    }

    /// `self += alpha * dir`
    pub(crate) fn add_scaled(&mut self, alpha: f64, dir: &Self, exec: Exec) {
        par::for_each_mut(exec, &mut self.blocks, |b, out| {
            for (o, &d) in out.as_mut_slice().iter_mut().zip(dir.blocks[b].as_slice()) {
                *o += alpha * d;
            }
        });
    }
}

/// `Re tr(O ρ)` precompiled for a block-diagonal `ρ`.
#[derive(Clone, Debug)]
pub(crate) struct BlockObservable {
    entries: Vec<Vec<(usize, usize, C64)>>,
}

impl BlockObservable {
    pub(crate) fn new(sectors: &Sectors, op: &SparseOperator) -> Result<Self> {
        check_dim(sectors.dim(), op.dim())?;
        Ok(Self { entries: sectors.split_diagonal(op) })
    }

    pub(crate) fn value(&self, state: &BlockState) -> f64 {
        self.entries
            .iter()
            .zip(&state.blocks)
            .map(|(e, rho)| e.iter().map(|&(i, j, v)| (v * rho[(j, i)]).re).sum::<f64>())
            .sum()
    }
}

/// Contribution `2w · X ρ_src X†` of one jump operator into one target block.
/// Entries carry `√(2w)` so a product of two of them has the full weight.
#[derive(Clone, Debug)]
struct JumpBlock {
    source: usize,
    entries: Vec<(usize, usize, C64)>,
    /// Same entries when all are real, which halves the gather cost.
    real: Option<Vec<(usize, usize, f64)>>,
}

impl JumpBlock {
    fn finish(mut self) -> Self {
        if self.entries.iter().all(|e| e.2.im == 0.0) {
            self.real = Some(self.entries.iter().map(|&(t, s, v)| (t, s, v.re)).collect());
        }
        self
    }

    /// `dst += X ρ_src X†` over the stored entries.
    fn gather(&self, src: &ComplexMatrix, dst: &mut [C64], m: usize) {
        let ms = src.cols();
        let src = src.as_slice();
        match &self.real {
            Some(entries) => {
                for &(t1, s1, v1) in entries {
                    let (row, src_row) = (&mut dst[t1 * m..(t1 + 1) * m], &src[s1 * ms..(s1 + 1) * ms]);
                    for &(t2, s2, v2) in entries {
                        row[t2] += src_row[s2] * (v1 * v2);
                    }
                }
            }
            None => {
                for &(t1, s1, v1) in &self.entries {
                    let (row, src_row) = (&mut dst[t1 * m..(t1 + 1) * m], &src[s1 * ms..(s1 + 1) * ms]);
                    for &(t2, s2, v2) in &self.entries {
                        row[t2] += v1 * v2.conj() * src_row[s2];
                    }
                }
            }
        }
    }
}

/// Sparse block stored as separate real and imaginary parts, row by row.
#[derive(Clone, Debug)]
struct SplitBlock {
    re: Vec<Vec<(usize, f64)>>,
    im: Vec<Vec<(usize, f64)>>,
}

impl SplitBlock {
    fn new(csr: &Csr) -> Self {
        let mut re = vec![Vec::new(); csr.rows];
        let mut im = vec![Vec::new(); csr.rows];
        for (i, j, v) in csr.triplets() {
            if v.re != 0.0 {
                re[i].push((j, v.re));
            }
            if v.im != 0.0 {
                im[i].push((j, v.im));
            }
        }
        Self { re, im }
    }

    /// `out = self · m` for square row-major `m` of the block's size.
    fn mul_dense_into(&self, m: &[C64], n: usize, out: &mut [C64]) {
        for (i, dst) in out.chunks_mut(n).enumerate() {
            dst.fill(ZERO);
            for &(k, v) in &self.re[i] {
                for (d, s) in dst.iter_mut().zip(&m[k * n..(k + 1) * n]) {
                    *d += s * v;
                }
            }
            for &(k, v) in &self.im[i] {
                for (d, s) in dst.iter_mut().zip(&m[k * n..(k + 1) * n]) {
                    *d += C64::new(-s.im * v, s.re * v);
                }
            }
        }
    }
}

/// Block-diagonal generator for dynamics with a conserved charge.
///
/// Requires the Hamiltonian to commute with the charge and every jump operator
/// to shift it by a fixed amount; then a block-diagonal `ρ` stays
/// block-diagonal and only the diagonal blocks need to be stored.
#[derive(Clone, Debug)]
pub struct SectorLiouvillian {
    sectors: Sectors,
    h_eff: Vec<SplitBlock>,
    /// Per target block, the jump contributions landing in it.
    jumps: Vec<Vec<JumpBlock>>,
}

impl SectorLiouvillian {
    pub fn new(h: &SparseOperator, terms: &[LindbladTerm], charge: &[i64]) -> Result<Self> {
        check_dim(h.dim(), charge.len())?;
        let sectors = Sectors::from_charge(charge)?;
        for (i, j, v) in h.triplets() {
            if charge[i] != charge[j] {
                return Err(Error::SymmetryViolation(format!(
                    "Hamiltonian entry ({i},{j}) = {v} changes the charge from {} to {}",
                    charge[j], charge[i]
                )));
            }
        }
        let mut h_eff = h.clone();
        let mut jumps: Vec<Vec<JumpBlock>> = vec![Vec::new(); sectors.n_blocks()];
        for (k, t) in terms.iter().enumerate() {
            check_dim(h.dim(), t.operator.dim())?;
            if t.weight == 0.0 || t.operator.nnz() == 0 {
                continue;
            }
            let mut shift = None;
            for (i, j, _) in t.operator.triplets() {
                let s = charge[i] - charge[j];
                if *shift.get_or_insert(s) != s {
                    return Err(Error::SymmetryViolation(format!("collapse operator {k} does not shift the charge uniformly")));
                }
            }
            let xdx = t.operator.adjoint().mul(&t.operator)?;
            h_eff = h_eff.sub(&xdx.scaled(C64::new(0.0, t.weight)))?;

            let root = (2.0 * t.weight).sqrt();
            let mut per_target: Vec<Option<JumpBlock>> = vec![None; sectors.n_blocks()];
            for (i, j, v) in t.operator.triplets() {
                let (bt, lt) = sectors.locate(i);
                let (bs, ls) = sectors.locate(j);
                per_target[bt]
                    .get_or_insert_with(|| JumpBlock { source: bs, entries: Vec::new(), real: None })
                    .entries
                    .push((lt, ls, v * root));
            }
            for (bt, jb) in per_target.into_iter().enumerate() {
                if let Some(jb) = jb {
                    debug_assert_eq!(sectors.block_by_charge(sectors.charge(bt) - shift.unwrap()), Some(jb.source));
                    jumps[bt].push(jb.finish());
                }
            }
        }
        let h_eff = sectors
            .split_diagonal(&h_eff)
            .into_iter()
            .enumerate()
            .map(|(b, t)| Ok(SplitBlock::new(&Csr::from_triplets(sectors.block_dim(b), sectors.block_dim(b), t)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sectors, h_eff, jumps })
    }

    pub fn sectors(&self) -> &Sectors {
        &self.sectors
    }

    /// `L(ρ)` for a Hermitian block-diagonal `ρ`; output blocks are exactly
    /// Hermitian.
    pub fn apply(&self, rho: &BlockState, exec: Exec) -> BlockState {
        let mut out = BlockState::zeros(&self.sectors);
        self.apply_into(rho, &mut out, exec);
        out
    }

    pub(crate) fn apply_into(&self, rho: &BlockState, out: &mut BlockState, exec: Exec) {
        par::for_each_mut(exec, &mut out.blocks, |b, dst| {
            let m = self.sectors.block_dim(b);
            let mut k = vec![ZERO; m * m];
            self.h_eff[b].mul_dense_into(rho.blocks[b].as_slice(), m, &mut k);
            let dst = dst.as_mut_slice();
            anti_hermitian_part(&k, m, dst);
            for jb in &self.jumps[b] {
                jb.gather(&rho.blocks[jb.source], dst, m);
            }
        });
    }
}
