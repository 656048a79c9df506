//! Takahashi recursions: the entries of `Q^{-1}` on the sparsity pattern of
//! the Cholesky factor, without forming the dense inverse.
//!
//! With `Σ = (L Lᵀ)^{-1}` and `i ≥ j` in the pattern of column `j`,
//!
//! ```text
//! Σ_ij = δ_ij / L_jj² − (1 / L_jj) Σ_{k > j, k ∈ struct(L_j)} L_kj Σ_ik
//! ```
//!
//! Columns are processed from last to first; every `Σ_ik` needed is already
//! available because `struct(L_j)` is a clique in the filled graph.

use super::cholesky::CholeskyFactor;

/// Selected inverse, stored on the pattern of `L` (permuted order).
#[derive(Debug, Clone)]
pub struct SelectedInverse {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    pinv: Vec<usize>,
}

impl SelectedInverse {
    pub fn compute(factor: &CholeskyFactor) -> Self {
        let (col_ptr, row_idx, l) = factor.columns();
        let n = factor.n();
        let mut sigma = vec![0.0; l.len()];
        let lookup = |sigma: &[f64], r: usize, c: usize| -> f64 {
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            let rows = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            match rows.binary_search(&r) {
                Ok(p) => sigma[col_ptr[c] + p],
                Err(_) => unreachable!("filled pattern is not closed at ({r}, {c})"),
            }
        };
        for j in (0..n).rev() {
            let p0 = col_ptr[j];
            let p1 = col_ptr[j + 1];
            let ljj = l[p0];
            for p in (p0 + 1..p1).rev() {
                let i = row_idx[p];
                let mut s = 0.0;
                for q in p0 + 1..p1 {
                    s += l[q] * lookup(&sigma, i, row_idx[q]);
                }
                sigma[p] = -s / ljj;
            }
            let mut s = 0.0;
            for q in p0 + 1..p1 {
                s += l[q] * sigma[q];
            }
            sigma[p0] = 1.0 / (ljj * ljj) - s / ljj;
        }
        let mut pinv = vec![0; n];
        for (new, &old) in factor.perm().iter().enumerate() {
            pinv[old] = new;
        }
        SelectedInverse { col_ptr: col_ptr.to_vec(), row_idx: row_idx.to_vec(), values: sigma, pinv }
    }

    /// `diag(Q^{-1})` in the original ordering.
    pub fn diagonal(&self) -> Vec<f64> {
        self.pinv.iter().map(|&j| self.values[self.col_ptr[j]]).collect()
    }

    /// `(Q^{-1})_{ij}` if `(i, j)` lies in the factor pattern.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = (self.pinv[i], self.pinv[j]);
        let (r, c) = if a >= b { (a, b) } else { (b, a) };
        let rows = &self.row_idx[self.col_ptr[c]..self.col_ptr[c + 1]];
        rows.binary_search(&r).ok().map(|p| self.values[self.col_ptr[c] + p])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;

    #[test]
    fn diagonal_of_scaled_identity() {
        let f = CholeskyFactor::new(&SparseMatrix::diagonal(&[4.0; 6]), 0.0).unwrap();
        let s = SelectedInverse::compute(&f);
        assert!(s.diagonal().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn two_by_two_matches_inverse() {
        let q = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)]);
        let f = CholeskyFactor::new(&q, 0.0).unwrap();
        let s = SelectedInverse::compute(&f);
        let d = s.diagonal();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-14 && (d[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!((s.get(0, 1).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }
}
