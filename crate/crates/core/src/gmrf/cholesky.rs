//! Simplicial sparse Cholesky factorization.
//!
//! Ordering is approximate minimum degree; the symbolic phase walks the
//! elimination tree to find row patterns, and the numeric phase is the
//! classic up-looking (row-by-row) algorithm. The factor is stored by
//! columns with the diagonal first and row indices ascending, which is the
//! layout the Takahashi recursions in [`super::takahashi`] rely on.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// `pinv[old] = new`.
    pinv: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    log_det: f64,
    jitter: f64,
}

/// Fill-reducing ordering of a symmetric pattern (`perm[new] = old`).
pub fn amd_ordering(q: &SparseMatrix) -> Vec<usize> {
    let n = q.n_rows();
    if n == 0 {
        return Vec::new();
    }
    // A symmetric CSR matrix is its own CSC.
    let control = amd::Control::default();
    match amd::order::<usize>(n, q.row_ptr(), q.col_idx(), &control) {
        Ok((p, _, _)) => p,
        Err(_) => (0..n).collect(),
    }
}

fn etree(c: &SparseMatrix) -> Vec<usize> {
    let n = c.n_rows();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        let (cols, _) = c.row(k);
        for &i0 in cols {
            let mut i = i0;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of L (excluding the diagonal), written to
/// `stack[top..]` in topological order. Returns `top`.
fn ereach(c: &SparseMatrix, k: usize, parent: &[usize], stamp: &mut [usize], stack: &mut [usize], path: &mut Vec<usize>) -> usize {
    let n = c.n_rows();
    let mut top = n;
    stamp[k] = k;
    let (cols, _) = c.row(k);
    for &i0 in cols {
        if i0 >= k {
            continue;
        }
        path.clear();
        let mut i = i0;
        while stamp[i] != k {
            path.push(i);
            stamp[i] = k;
            i = parent[i];
        }
        while let Some(p) = path.pop() {
            top -= 1;
            stack[top] = p;
        }
    }
    top
}

impl CholeskyFactor {
    /// Factorize `P (Q + jitter·I) Pᵀ = L Lᵀ` using an AMD ordering.
    pub fn new(q: &SparseMatrix, jitter: f64) -> Result<Self> {
        let perm = amd_ordering(q);
        Self::with_ordering(q, jitter, perm)
    }

    /// Factorize with a caller-supplied ordering (`perm[new] = old`).
    pub fn with_ordering(q: &SparseMatrix, jitter: f64, perm: Vec<usize>) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::DimensionMismatch { expected: q.n_rows(), got: q.n_cols() });
        }
        let n = q.n_rows();
        let mut pinv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }
        let c = q.permute_symmetric(&perm);
        let parent = etree(&c);

        let mut stamp = vec![NONE; n];
        let mut stack = vec![0; n];
        let mut path = Vec::new();

        // Column counts from the row patterns.
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut stamp, &mut stack, &mut path);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut col_ptr = vec![0; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = col_ptr[..n].to_vec();

        stamp.iter_mut().for_each(|s| *s = NONE);
        let mut x = vec![0.0; n];
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut stamp, &mut stack, &mut path);
            let (cols, vals) = c.row(k);
            for (&i, &v) in cols.iter().zip(vals) {
                if i <= k {
                    x[i] += v;
                }
            }
            let mut d = x[k] + jitter;
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: perm[k], value: d });
            }
            let p = next[k];
            next[k] += 1;
            row_idx[p] = k;
            values[p] = d.sqrt();
        }
        let log_det = 2.0 * (0..n).map(|j| values[col_ptr[j]].ln()).sum::<f64>();
        Ok(CholeskyFactor { n, perm, pinv, col_ptr, row_idx, values, log_det, jitter })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Log-determinant of the factorized matrix (including any jitter).
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn columns(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.col_ptr, &self.row_idx, &self.values)
    }

    /// The factor as a (permuted-order) lower-triangular sparse matrix.
    pub fn l_matrix(&self) -> SparseMatrix {
        let mut t = Vec::with_capacity(self.nnz());
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                t.push((self.row_idx[p], j, self.values[p]));
            }
        }
        SparseMatrix::from_triplets(self.n, self.n, &t)
    }

    /// In-place `L y = b` on permuted-order data.
    pub(crate) fn forward(&self, y: &mut [f64]) {
        for j in 0..self.n {
            let p0 = self.col_ptr[j];
            y[j] /= self.values[p0];
            let yj = y[j];
            for p in p0 + 1..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
    }

    /// In-place `Lᵀ x = y` on permuted-order data.
    pub(crate) fn backward(&self, x: &mut [f64]) {
        for j in (0..self.n).rev() {
            let p0 = self.col_ptr[j];
            let mut s = x[j];
            for p in p0 + 1..self.col_ptr[j + 1] {
                s -= self.values[p] * x[self.row_idx[p]];
            }
            x[j] = s / self.values[p0];
        }
    }

    pub(crate) fn permute(&self, b: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&old| b[old]).collect()
    }

    pub(crate) fn unpermute(&self, y: &[f64]) -> Vec<f64> {
        self.pinv.iter().map(|&new| y[new]).collect()
    }

    /// Solve `Q x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        let mut y = self.permute(b);
        self.forward(&mut y);
        self.backward(&mut y);
        Ok(self.unpermute(&y))
    }

    /// `x = P^T L^{-T} z`: maps standard normal `z` to a draw with covariance `Q^{-1}`.
    pub fn back_substitute_noise(&self, z: &[f64]) -> Vec<f64> {
        let mut x = z.to_vec();
        self.backward(&mut x);
        self.unpermute(&x)
    }

    /// `P^T L z` in original order: maps `z` to a vector with covariance `Q`.
    pub fn l_mul(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, zj) in z.iter().enumerate() {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.row_idx[p]] += self.values[p] * zj;
            }
        }
        self.unpermute(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn identity_has_zero_logdet() {
        let f = CholeskyFactor::new(&SparseMatrix::identity(5), 0.0).unwrap();
        assert_eq!(f.log_det(), 0.0);
    }

    #[test]
    fn reconstructs_matrix() {
        let q = tridiag(12);
        let f = CholeskyFactor::new(&q, 0.0).unwrap();
        let l = f.l_matrix();
        let llt = l.mul(&l.transpose()).unwrap();
        let pq = q.permute_symmetric(f.perm());
        assert!(llt.max_abs_diff(&pq) < 1e-12);
    }

    #[test]
    fn solve_residual() {
        let q = tridiag(30);
        let f = CholeskyFactor::new(&q, 0.0).unwrap();
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b).unwrap();
        let r = q.matvec(&x);
        let err: f64 = r.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn indefinite_is_rejected() {
        let q = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(CholeskyFactor::new(&q, 0.0), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn dimension_mismatch_on_solve() {
        let f = CholeskyFactor::new(&SparseMatrix::identity(3), 0.0).unwrap();
        assert!(matches!(f.solve(&[1.0]), Err(Error::DimensionMismatch { expected: 3, got: 1 })));
    }
}
