//! Compressed sparse row matrices.
//!
//! Every precision, mass, stiffness and projection matrix in the crate is a
//! [`SparseMatrix`]. Symmetric matrices are stored in full (both triangles);
//! the assembly routines produce them symmetric to the last bit.

mod mtx;

pub use mtx::{read_matrix_market, write_matrix_market};

use crate::error::{check_dim, Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub len: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn new(len: usize, mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut indices: Vec<usize> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        SparseVector { len, indices, values }
    }

    pub fn zeros(len: usize) -> Self {
        SparseVector { len, indices: Vec::new(), values: Vec::new() }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices.iter().zip(&self.values).map(|(&i, &v)| v * x[i]).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.indices.binary_search(&i) {
            Ok(p) => self.values[p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets. Duplicates are summed in the
    /// order they appear, so two symmetric insertion sequences give bitwise
    /// symmetric results. Explicit zeros are kept (they carry pattern).
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for &(i, j, _) in triplets {
            assert!(i < n_rows && j < n_cols, "triplet ({i},{j}) out of bounds");
            counts[i + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        // Bucket by row keeping insertion order, then stable sort each row.
        let mut next = counts.clone();
        let mut bucket: Vec<(usize, f64)> = vec![(0, 0.0); triplets.len()];
        for &(i, j, v) in triplets {
            bucket[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for i in 0..n_rows {
            let row = &mut bucket[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix { n_rows, n_cols, row_ptr, col_idx, values }
    }

    /// Build directly from CSR arrays, validating the layout.
    pub fn from_csr(n_rows: usize, n_cols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 || row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::Parse("inconsistent row pointers".into()));
        }
        check_dim(col_idx.len(), values.len())?;
        for i in 0..n_rows {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n_cols) {
                return Err(Error::Parse(format!("row {i} has unsorted or out-of-range columns")));
            }
        }
        Ok(SparseMatrix { n_rows, n_cols, row_ptr, col_idx, values })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        SparseMatrix { n_rows: n, n_cols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: d.to_vec() }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_vector(&self, i: usize) -> SparseVector {
        let (c, v) = self.row(i);
        SparseVector { len: self.n_cols, indices: c.to_vec(), values: v.to_vec() }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    /// Stack rows (sparse vectors of equal length) into a matrix.
    pub fn from_rows(n_cols: usize, rows: &[SparseVector]) -> Result<Self> {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in rows {
            check_dim(n_cols, r.len)?;
            col_idx.extend_from_slice(&r.indices);
            values.extend_from_slice(&r.values);
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix { n_rows: rows.len(), n_cols, row_ptr, col_idx, values })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut out = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                out[j] += a * xi;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                col_idx[next[j]] = i;
                values[next[j]] = a;
                next[j] += 1;
            }
        }
        SparseMatrix { n_rows: self.n_cols, n_cols: self.n_rows, row_ptr: counts, col_idx, values }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `diag(left) · self · diag(right)`, computed as `(left_i * right_j) * a_ij`.
    /// With `left == right` the result of a symmetric matrix stays bitwise symmetric.
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> Self {
        assert_eq!(left.len(), self.n_rows);
        assert_eq!(right.len(), self.n_cols);
        let mut out = self.clone();
        for (i, li) in left.iter().enumerate() {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.values[p] = (li * right[self.col_idx[p]]) * self.values[p];
            }
        }
        out
    }

    /// `alpha * self + beta * other`, pattern is the union of both patterns.
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<Self> {
        check_dim(self.n_rows, other.n_rows)?;
        check_dim(self.n_cols, other.n_cols)?;
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n_rows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(usize::MAX);
                let jb = cb.get(q).copied().unwrap_or(usize::MAX);
                if ja == jb {
                    col_idx.push(ja);
                    values.push(alpha * va[p] + beta * vb[q]);
                    p += 1;
                    q += 1;
                } else if ja < jb {
                    col_idx.push(ja);
                    values.push(alpha * va[p]);
                    p += 1;
                } else {
                    col_idx.push(jb);
                    values.push(beta * vb[q]);
                    q += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values })
    }

    /// Sparse product `self · diag(d) · other` (pass `None` for a plain product).
    ///
    /// Each term is accumulated as `d_k * (a_ik * b_kj)` in increasing `k`.
    /// Multiplication is commutative, so for symmetric `A = B` the entries
    /// `(i, j)` and `(j, i)` see identical operations and the product is
    /// exactly symmetric.
    pub fn mul_diag(&self, d: Option<&[f64]>, other: &SparseMatrix) -> Result<Self> {
        check_dim(self.n_cols, other.n_rows)?;
        if let Some(d) = d {
            check_dim(self.n_cols, d.len())?;
        }
        let m = other.n_cols;
        let mut acc = vec![0.0; m];
        let mut mark = vec![usize::MAX; m];
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut pattern: Vec<usize> = Vec::new();
        for i in 0..self.n_rows {
            pattern.clear();
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let dk = d.map_or(1.0, |d| d[k]);
                let (cb, vb) = other.row(k);
                for (&j, &b) in cb.iter().zip(vb) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        pattern.push(j);
                    }
                    acc[j] += dk * (a * b);
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix { n_rows: self.n_rows, n_cols: m, row_ptr, col_idx, values })
    }

    pub fn mul(&self, other: &SparseMatrix) -> Result<Self> {
        self.mul_diag(None, other)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &SparseMatrix) -> Self {
        let (p, q) = (other.n_rows, other.n_cols);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(self.nnz() * other.nnz());
        let mut values = Vec::with_capacity(self.nnz() * other.nnz());
        for i in 0..self.n_rows {
            let (ca, va) = self.row(i);
            for k in 0..p {
                let (cb, vb) = other.row(k);
                for (&j, &a) in ca.iter().zip(va) {
                    for (&l, &b) in cb.iter().zip(vb) {
                        col_idx.push(j * q + l);
                        values.push(a * b);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        SparseMatrix { n_rows: self.n_rows * p, n_cols: self.n_cols * q, row_ptr, col_idx, values }
    }

    /// Horizontal concatenation `[A_1, A_2, ...]`.
    pub fn hstack(blocks: &[&SparseMatrix]) -> Result<Self> {
        let n_rows = blocks.first().map_or(0, |b| b.n_rows);
        let mut triplets = Vec::new();
        let mut offset = 0;
        for b in blocks {
            check_dim(n_rows, b.n_rows)?;
            triplets.extend(b.triplets().map(|(i, j, v)| (i, j + offset, v)));
            offset += b.n_cols;
        }
        Ok(Self::from_triplets(n_rows, offset, &triplets))
    }

    /// Block-diagonal matrix.
    pub fn block_diag(blocks: &[&SparseMatrix]) -> Self {
        let n_rows = blocks.iter().map(|b| b.n_rows).sum();
        let n_cols = blocks.iter().map(|b| b.n_cols).sum();
        let mut triplets = Vec::new();
        let (mut ro, mut co) = (0, 0);
        for b in blocks {
            triplets.extend(b.triplets().map(|(i, j, v)| (i + ro, j + co, v)));
            ro += b.n_rows;
            co += b.n_cols;
        }
        Self::from_triplets(n_rows, n_cols, &triplets)
    }

    /// Symmetric permutation `P A Pᵀ` where `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        let n = self.n_rows;
        let mut pinv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }
        let triplets: Vec<_> = self.triplets().map(|(i, j, v)| (pinv[i], pinv[j], v)).collect();
        Self::from_triplets(n, n, &triplets)
    }

    /// Exact (bitwise) symmetry check.
    pub fn is_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        self.triplets().all(|(i, j, v)| {
            let (c, vals) = self.row(j);
            match c.binary_search(&i) {
                Ok(p) => vals[p].to_bits() == v.to_bits(),
                Err(_) => false,
            }
        })
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.n_rows == other.n_rows && self.n_cols == other.n_cols && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// Copy the upper triangle onto the lower one. Used after products of
    /// more than two factors, where summation order can differ by one ulp.
    pub fn mirror_upper(&self) -> Self {
        let triplets: Vec<_> = self
            .triplets()
            .filter(|&(i, j, _)| j >= i)
            .flat_map(|(i, j, v)| {
                let mut t = vec![(i, j, v)];
                if i != j {
                    t.push((j, i, v));
                }
                t
            })
            .collect();
        Self::from_triplets(self.n_rows, self.n_cols, &triplets)
    }

    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        self.add_scaled(1.0, other, -1.0).map(|d| d.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))).unwrap_or(f64::INFINITY)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Dense matrix to sparse, dropping exact zeros.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    triplets.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &triplets)
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> SparseMatrix {
        SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (0, 2, 0.5)])
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = small();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 2), 2.5);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn transpose_and_matvec() {
        let a = small();
        let x = [1.0, 2.0, 3.0];
        assert_eq!(a.matvec(&x), vec![8.5, 6.0]);
        assert_eq!(a.transpose().matvec(&[1.0, 1.0]), a.transpose_matvec(&[1.0, 1.0]));
    }

    #[test]
    fn product_matches_dense() {
        let a = small();
        let b = a.transpose();
        let p = a.mul(&b).unwrap();
        let dense = a.to_dense() * b.to_dense();
        assert!((p.to_dense() - dense).abs().max() < 1e-15);
    }

    #[test]
    fn kron_matches_dense() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)]);
        let b = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 2, 4.0), (2, 1, 4.0), (2, 2, -3.0)]);
        let k = a.kron(&b);
        assert_eq!(k.nnz(), a.nnz() * b.nnz());
        assert_eq!(k.to_dense(), a.to_dense().kronecker(&b.to_dense()));
    }

    #[test]
    fn symmetric_triple_product_is_exact() {
        let k = SparseMatrix::from_triplets(3, 3, &[(0, 0, 0.3), (0, 1, -0.1), (1, 0, -0.1), (1, 1, 0.7), (1, 2, 0.11), (2, 1, 0.11), (2, 2, 1.3)]);
        let q = k.mul_diag(Some(&[1.0 / 3.0, 0.7, 1.1]), &k).unwrap();
        assert!(q.is_symmetric());
    }

    proptest! {
        #[test]
        fn add_scaled_is_linear(vals in proptest::collection::vec(-5.0f64..5.0, 6)) {
            let a = SparseMatrix::from_triplets(2, 3, &[(0, 0, vals[0]), (1, 2, vals[1]), (0, 1, vals[2])]);
            let b = SparseMatrix::from_triplets(2, 3, &[(0, 0, vals[3]), (1, 1, vals[4]), (1, 2, vals[5])]);
            let s = a.add_scaled(2.0, &b, -1.0).unwrap();
            let d = a.to_dense() * 2.0 - b.to_dense();
            prop_assert!((s.to_dense() - d).abs().max() < 1e-12);
        }
    }
}
