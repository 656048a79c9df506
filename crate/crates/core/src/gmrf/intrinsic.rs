//! Exact marginal variances of intrinsic models with a known null space.
//!
//! With null basis `N` and pivot rows `p` (so that `N_p` is invertible),
//! `Q_RR` on the remaining rows is positive definite and its zero-padded
//! inverse `M` is a generalized inverse of `Q`. Under constraints `C x = 0`
//! with `C N` invertible the covariance is `T M Tᵀ`, `T = I − N (C N)⁻¹ C`;
//! for `C = Nᵀ` this is the orthogonal projection of `M`.
//! Unlike jittering, no term grows with the inverse of a small number.

use super::{CholeskyFactor, SelectedInverse};
use crate::error::{check_dim, Error, Result};
use crate::sparse::SparseMatrix;
use nalgebra::DMatrix;

/// Pivot columns of a small dense row set by Gaussian elimination with
/// partial pivoting; rows that are (numerically) dependent yield no pivot.
pub(crate) fn pivot_columns(rows: &[Vec<f64>]) -> Vec<usize> {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let ncol = a.first().map_or(0, Vec::len);
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncol {
        if r == a.len() {
            break;
        }
        let (best, val) = (r..a.len()).map(|i| (i, a[i][c].abs())).fold((r, 0.0), |m, x| if x.1 > m.1 { x } else { m });
        if val <= 1e-12 * scale {
            continue;
        }
        a.swap(r, best);
        let pivot = a[r].clone();
        for row in a.iter_mut().skip(r + 1) {
            let f = row[c] / pivot[c];
            for (x, p) in row[c..ncol].iter_mut().zip(&pivot[c..ncol]) {
                *x -= f * p;
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// `diag` of the covariance of the intrinsic model `q` restricted to the
/// orthogonal complement of `null_basis` (one vector per null direction).
pub fn projected_marginal_variances(q: &SparseMatrix, null_basis: &[Vec<f64>]) -> Result<Vec<f64>> {
    constrained_marginal_variances(q, null_basis, null_basis)
}

/// `diag` of the covariance of the intrinsic model `q` with null space
/// spanned by `null_basis`, under `constraints · x = 0` (one dense row per
/// null direction; `constraints · null_basis` must be invertible).
pub fn constrained_marginal_variances(q: &SparseMatrix, null_basis: &[Vec<f64>], constraints: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = q.n_rows();
    let k = null_basis.len();
    check_dim(k, constraints.len())?;
    for v in null_basis.iter().chain(constraints) {
        check_dim(n, v.len())?;
    }
    let piv = pivot_columns(null_basis);
    if piv.len() != k {
        return Err(Error::RankDeficientConstraints);
    }
    let mut new_index = vec![usize::MAX; n];
    let keep: Vec<usize> = (0..n).filter(|i| !piv.contains(i)).collect();
    for (a, &i) in keep.iter().enumerate() {
        new_index[i] = a;
    }
    let trip: Vec<_> =
        q.triplets().filter(|&(i, j, _)| new_index[i] != usize::MAX && new_index[j] != usize::MAX).map(|(i, j, v)| (new_index[i], new_index[j], v)).collect();
    let reduced = SparseMatrix::from_triplets(keep.len(), keep.len(), &trip);
    let factor = CholeskyFactor::new(&reduced, 0.0)?;
    let sel = SelectedInverse::compute(&factor).diagonal();
    let pad = |r: &[f64]| {
        let mut out = vec![0.0; n];
        keep.iter().zip(r).for_each(|(&i, &v)| out[i] = v);
        out
    };
    let m_diag = pad(&sel);
    // Columns of M Cᵀ.
    let mc: Vec<Vec<f64>> =
        constraints.iter().map(|c| factor.solve(&keep.iter().map(|&i| c[i]).collect::<Vec<_>>()).map(|z| pad(&z))).collect::<Result<_>>()?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let cn = DMatrix::from_fn(k, k, |a, b| dot(&constraints[a], &null_basis[b]));
    let cn_inv = cn.try_inverse().ok_or(Error::RankDeficientConstraints)?;
    let cmc = DMatrix::from_fn(k, k, |a, b| dot(&constraints[a], &mc[b]));
    Ok((0..n)
        .map(|i| {
            // Row i of B = N (C N)⁻¹.
            let b: Vec<f64> = (0..k).map(|a| (0..k).map(|c| null_basis[c][i] * cn_inv[(c, a)]).sum()).collect();
            let cross: f64 = (0..k).map(|a| mc[a][i] * b[a]).sum();
            let quad: f64 = (0..k).map(|a| (0..k).map(|c| b[a] * cmc[(a, c)] * b[c]).sum::<f64>()).sum();
            m_diag[i] - 2.0 * cross + quad
        })
        .collect())
}
