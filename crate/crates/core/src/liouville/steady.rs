use nalgebra::{DMatrix, DVector};

use crate::hilbert::SparseOperator;
use crate::model::LindbladTerm;
use crate::{Error, Result};

/// Stationary basis-state populations of a master equation whose Hamiltonian
/// is diagonal and whose collapse operators each have at most one nonzero per
/// row and column.
///
/// Under those conditions populations evolve independently of coherences
/// according to the rate matrix `W[t][s] = Σ 2w |x_ts|²`, and coherences decay,
/// so the stationary state is `diag(p)` with `W p = 0`, `Σ p = 1`.
pub fn stationary_populations(h: &SparseOperator, terms: &[LindbladTerm]) -> Result<Vec<f64>> {
    let n = h.dim();
    if !h.is_diagonal() {
        return Err(Error::InvalidRegime("rate-equation solver needs a diagonal Hamiltonian".into()));
    }
    let mut w = DMatrix::<f64>::zeros(n, n);
    for (k, t) in terms.iter().enumerate() {
        if t.operator.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: t.operator.dim() });
        }
        if !t.operator.is_monomial() {
            return Err(Error::InvalidRegime(format!("collapse operator {k} mixes basis states")));
        }
        for (target, source, v) in t.operator.triplets() {
            let rate = 2.0 * t.weight * v.norm_sqr();
            w[(target, source)] += rate;
            w[(source, source)] -= rate;
        }
    }
    // Replace the last balance equation by normalization.
    let mut rhs = DVector::<f64>::zeros(n);
    for j in 0..n {
        w[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let p = w
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalConsistency("rate matrix is singular; stationary state not unique".into()))?;
    let worst = p.iter().copied().fold(f64::INFINITY, f64::min);
    if worst < -1e-10 || p.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalConsistency(format!("stationary populations not a distribution (min {worst:e})")));
    }
    Ok(p.iter().map(|x| x.max(0.0)).collect())
}
