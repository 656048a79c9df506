//! Sparse Gaussian kernel: factorization, sampling, solving, log-density,
//! Gaussian conditioning, marginal variances and linear equality constraints.
//!
//! A [`PrecisionModel`] describes `x ~ N(mean, Q^{-1})`, optionally restricted
//! to `C x = e`. [`factorize`] turns it into a [`Gmrf`], which owns the
//! Cholesky factor and the small dense blocks needed for constraint
//! corrections. Intrinsic models (`rank_deficiency > 0`) are factorized with
//! a diagonal jitter of `1e-9 × mean(diag Q)`; their constraints are expected
//! to span the null space.

mod cholesky;
mod intrinsic;
mod takahashi;

pub use cholesky::{amd_ordering, CholeskyFactor};
pub(crate) use intrinsic::pivot_columns;
pub use intrinsic::{constrained_marginal_variances, projected_marginal_variances};
pub use takahashi::SelectedInverse;

use crate::error::{check_dim, Error, Result};
use crate::par;
use crate::rng::stream_rng;
use crate::sparse::{SparseMatrix, SparseVector};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Relative jitter added to intrinsic precisions before factorization.
pub const INTRINSIC_JITTER: f64 = 1e-9;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Linear equality constraints `C x = e` with full row rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    matrix: SparseMatrix,
    rhs: Vec<f64>,
}

impl Constraints {
    /// Build from rows and right-hand sides. Rows that are linearly dependent
    /// on earlier ones are dropped, so the result always has full row rank.
    pub fn new(rows: Vec<SparseVector>, rhs: Vec<f64>) -> Result<Self> {
        check_dim(rows.len(), rhs.len())?;
        let n = rows.first().map_or(0, |r| r.len);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut kept_rows = Vec::new();
        let mut kept_rhs = Vec::new();
        for (row, e) in rows.into_iter().zip(rhs) {
            check_dim(n, row.len)?;
            let mut v = row.to_dense();
            let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm0 == 0.0 {
                continue;
            }
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(b).for_each(|(a, b)| *a -= d * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-10 * norm0 {
                v.iter_mut().for_each(|a| *a /= norm);
                basis.push(v);
                kept_rows.push(row);
                kept_rhs.push(e);
            }
        }
        Ok(Constraints { matrix: SparseMatrix::from_rows(n, &kept_rows)?, rhs: kept_rhs })
    }

    /// Rows the caller knows to be linearly independent.
    pub(crate) fn from_independent(rows: &[SparseVector], rhs: Vec<f64>, n: usize) -> Result<Self> {
        check_dim(rows.len(), rhs.len())?;
        Ok(Constraints { matrix: SparseMatrix::from_rows(n, rows)?, rhs })
    }

    /// Single sum-to-zero constraint over all `n` entries.
    pub fn sum_to_zero(n: usize) -> Self {
        let row = SparseVector { len: n, indices: (0..n).collect(), values: vec![1.0; n] };
        Constraints { matrix: SparseMatrix::from_rows(n, &[row]).unwrap(), rhs: vec![0.0] }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_cols()
    }

    /// Stack two constraint sets over the same vector.
    pub fn stack(&self, other: &Constraints) -> Result<Self> {
        let rows: Vec<_> = (0..self.len()).map(|i| self.matrix.row_vector(i)).chain((0..other.len()).map(|i| other.matrix.row_vector(i))).collect();
        let rhs = self.rhs.iter().chain(&other.rhs).copied().collect();
        Constraints::new(rows, rhs)
    }

    /// Embed into a longer vector at `offset` (total length `n`).
    pub fn embed(&self, offset: usize, n: usize) -> Self {
        let rows: Vec<_> = (0..self.len())
            .map(|i| {
                let r = self.matrix.row_vector(i);
                SparseVector { len: n, indices: r.indices.iter().map(|j| j + offset).collect(), values: r.values }
            })
            .collect();
        Constraints { matrix: SparseMatrix::from_rows(n, &rows).unwrap(), rhs: self.rhs.clone() }
    }
}

/// Gaussian model in precision form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionModel {
    pub q: SparseMatrix,
    pub mean: Vec<f64>,
    pub constraints: Option<Constraints>,
    /// Which construction produced this model.
    pub label: String,
    /// Dimension of the null space of `q` (0 for proper models).
    pub rank_deficiency: usize,
}

impl PrecisionModel {
    pub fn new(q: SparseMatrix, label: impl Into<String>) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::DimensionMismatch { expected: q.n_rows(), got: q.n_cols() });
        }
        let n = q.n_rows();
        Ok(PrecisionModel { q, mean: vec![0.0; n], constraints: None, label: label.into(), rank_deficiency: 0 })
    }

    pub fn dim(&self) -> usize {
        self.q.n_rows()
    }

    pub fn with_mean(mut self, mean: Vec<f64>) -> Result<Self> {
        check_dim(self.dim(), mean.len())?;
        self.mean = mean;
        Ok(self)
    }

    pub fn with_constraints(mut self, c: Constraints) -> Result<Self> {
        if !c.is_empty() {
            check_dim(self.dim(), c.dim())?;
            self.constraints = Some(c);
        }
        Ok(self)
    }

    pub fn intrinsic(mut self, rank_deficiency: usize) -> Self {
        self.rank_deficiency = rank_deficiency;
        self
    }

    /// Jitter used when factorizing this model.
    pub fn jitter(&self) -> f64 {
        if self.rank_deficiency == 0 || self.dim() == 0 {
            0.0
        } else {
            let d = self.q.diag();
            INTRINSIC_JITTER * d.iter().sum::<f64>() / d.len() as f64
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        PrecisionModel { q: self.q.scale(s), ..self.clone() }
    }
}

/// Precomputed pieces for conditioning by kriging.
#[derive(Debug, Clone)]
struct Kriging {
    c: SparseMatrix,
    e: Vec<f64>,
    /// Columns of `W = Q^{-1} Cᵀ`.
    w: Vec<Vec<f64>>,
    /// Cholesky of `C W` (k × k).
    s_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    s_log_det: f64,
    cct_log_det: f64,
}

impl Kriging {
    fn new(factor: &CholeskyFactor, c: &Constraints) -> Result<Self> {
        let k = c.len();
        let ct = c.matrix().transpose();
        let w: Vec<Vec<f64>> = par::try_map_range(k, |a| {
            let col: Vec<f64> = (0..ct.n_rows()).map(|i| ct.get(i, a)).collect();
            factor.solve(&col)
        })?;
        let mut s = DMatrix::zeros(k, k);
        for a in 0..k {
            let row = c.matrix().row_vector(a);
            for b in 0..k {
                s[(a, b)] = row.dot(&w[b]);
            }
        }
        let s = (&s + s.transpose()) * 0.5;
        let s_chol = nalgebra::Cholesky::new(s).ok_or(Error::RankDeficientConstraints)?;
        let s_log_det = 2.0 * s_chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let cct = c.matrix().mul(&ct)?.to_dense();
        let cct_log_det =
            nalgebra::Cholesky::new(cct).map(|ch| 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()).ok_or(Error::RankDeficientConstraints)?;
        Ok(Kriging { c: c.matrix().clone(), e: c.rhs().to_vec(), w, s_chol, s_log_det, cct_log_det })
    }

    fn residual(&self, x: &[f64]) -> DVector<f64> {
        let cx = self.c.matvec(x);
        DVector::from_iterator(cx.len(), cx.iter().zip(&self.e).map(|(a, b)| a - b))
    }

    fn correct(&self, x: &mut [f64]) {
        let r = self.residual(x);
        let lambda = self.s_chol.solve(&r);
        for (wa, la) in self.w.iter().zip(lambda.iter()) {
            x.iter_mut().zip(wa).for_each(|(xi, wi)| *xi -= wi * la);
        }
    }
}

/// A factorized [`PrecisionModel`].
#[derive(Debug, Clone)]
pub struct Gmrf {
    model: PrecisionModel,
    factor: CholeskyFactor,
    kriging: Option<Kriging>,
}

/// Factorize a model: sparse Cholesky plus constraint pre-computation.
pub fn factorize(model: &PrecisionModel) -> Result<Gmrf> {
    Gmrf::new(model.clone())
}

impl Gmrf {
    pub fn new(model: PrecisionModel) -> Result<Self> {
        let factor = CholeskyFactor::new(&model.q, model.jitter())?;
        let kriging = match &model.constraints {
            Some(c) if !c.is_empty() => Some(Kriging::new(&factor, c)?),
            _ => None,
        };
        Ok(Gmrf { model, factor, kriging })
    }

    pub fn model(&self) -> &PrecisionModel {
        &self.model
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Log-determinant of the factorized precision.
    pub fn log_det(&self) -> f64 {
        self.factor.log_det()
    }

    /// `Q^{-1} b` (ignores constraints).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.factor.solve(b)
    }

    /// Apply conditioning by kriging: `x − W (C W)^{-1} (C x − e)`.
    pub fn correct(&self, x: &mut [f64]) {
        if let Some(k) = &self.kriging {
            k.correct(x);
        }
    }

    /// Mean of the (constrained) distribution.
    pub fn constrained_mean(&self) -> Vec<f64> {
        let mut m = self.model.mean.clone();
        self.correct(&mut m);
        m
    }

    /// Transform a standard-normal vector into a draw.
    pub fn draw_from_noise(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.factor.back_substitute_noise(z);
        x.iter_mut().zip(&self.model.mean).for_each(|(xi, m)| *xi += m);
        self.correct(&mut x);
        x
    }

    /// `n_draws` independent draws. Draw `d` uses RNG stream `d` of `seed`,
    /// so results do not depend on thread count.
    pub fn sample(&self, n_draws: usize, seed: u64) -> Vec<Vec<f64>> {
        let n = self.dim();
        par::map_range(n_draws, |d| {
            let mut rng = stream_rng(seed, d as u64);
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            self.draw_from_noise(&z)
        })
    }

    /// Log-density of `x`. Under constraints the density is taken with
    /// respect to Lebesgue measure on the affine subspace `C x = e`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let n = self.dim() as f64;
        let dx: Vec<f64> = x.iter().zip(&self.model.mean).map(|(a, b)| a - b).collect();
        let mut quad = self.model.q.quad_form(&dx);
        let jitter = self.factor.jitter();
        if jitter > 0.0 {
            quad += jitter * dx.iter().map(|v| v * v).sum::<f64>();
        }
        let mut lp = 0.5 * self.log_det() - 0.5 * n * LN_2PI - 0.5 * quad;
        if let Some(k) = &self.kriging {
            // log N(Cx; Cμ, C Q^{-1} Cᵀ) + ½ log|C Cᵀ| on the constraint values.
            let r = DVector::from_vec(k.c.matvec(&dx));
            let kk = r.len() as f64;
            let sol = k.s_chol.solve(&r);
            let lcx = -0.5 * kk * LN_2PI - 0.5 * k.s_log_det - 0.5 * r.dot(&sol);
            lp -= lcx + 0.5 * k.cct_log_det;
        }
        Ok(lp)
    }

    /// `diag(Q^{-1})`, corrected for constraints. Exact via Takahashi.
    pub fn marginal_variances(&self) -> Vec<f64> {
        let mut v = SelectedInverse::compute(&self.factor).diagonal();
        if let Some(k) = &self.kriging {
            let kk = k.w.len();
            let sinv = k.s_chol.inverse();
            for (i, vi) in v.iter_mut().enumerate() {
                let mut s = 0.0;
                for a in 0..kk {
                    for b in 0..kk {
                        s += k.w[a][i] * sinv[(a, b)] * k.w[b][i];
                    }
                }
                *vi -= s;
            }
        }
        v
    }

    /// Column `j` of the (constrained) covariance matrix.
    pub fn covariance_column(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        e[j] = 1.0;
        let mut col = self.factor.solve(&e).expect("dimension checked");
        if let Some(k) = &self.kriging {
            let wj = DVector::from_iterator(k.w.len(), k.w.iter().map(|w| w[j]));
            let lambda = k.s_chol.solve(&wj);
            for (wa, la) in k.w.iter().zip(lambda.iter()) {
                col.iter_mut().zip(wa).for_each(|(c, w)| *c -= w * la);
            }
        }
        col
    }

    /// Dense covariance (constrained). Only sensible for small models.
    pub fn covariance_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let cols = par::map_range(n, |j| self.covariance_column(j));
        DMatrix::from_fn(n, n, |i, j| cols[j][i])
    }

    /// Marginal variances from the dense covariance; a cross-check for
    /// [`Gmrf::marginal_variances`] on models up to a few hundred nodes.
    pub fn marginal_variances_dense(&self) -> Vec<f64> {
        self.covariance_dense().diagonal().iter().copied().collect()
    }
}

/// Draws from the model; see [`Gmrf::sample`].
pub fn sample(gmrf: &Gmrf, n_draws: usize, seed: u64) -> Vec<Vec<f64>> {
    gmrf.sample(n_draws, seed)
}

/// Solve `Q x = b`.
pub fn solve(gmrf: &Gmrf, b: &[f64]) -> Result<Vec<f64>> {
    gmrf.solve(b)
}

pub fn log_density(model: &PrecisionModel, x: &[f64]) -> Result<f64> {
    factorize(model)?.log_density(x)
}

pub fn marginal_variances(model: &PrecisionModel) -> Result<Vec<f64>> {
    Ok(factorize(model)?.marginal_variances())
}

/// Condition on `y = A x + ε`, `ε ~ N(0, I / noise_precision)`.
pub fn condition_gaussian(model: &PrecisionModel, a: &SparseMatrix, y: &[f64], noise_precision: f64) -> Result<PrecisionModel> {
    check_dim(model.dim(), a.n_cols())?;
    check_dim(a.n_rows(), y.len())?;
    if !(noise_precision > 0.0) {
        return Err(Error::NonPositivePrecision(noise_precision));
    }
    if a.n_rows() == 0 {
        return Ok(model.clone());
    }
    let at = a.transpose();
    let ata = at.mul(a)?;
    let q_post = model.q.add_scaled(1.0, &ata, noise_precision)?;
    let mut rhs = model.q.matvec(&model.mean);
    rhs.iter_mut().zip(at.matvec(y)).for_each(|(r, v)| *r += noise_precision * v);
    let post = PrecisionModel {
        q: q_post,
        mean: vec![0.0; model.dim()],
        constraints: model.constraints.clone(),
        label: format!("posterior({})", model.label),
        rank_deficiency: model.rank_deficiency,
    };
    let factor = CholeskyFactor::new(&post.q, post.jitter())?;
    let mean = factor.solve(&rhs)?;
    Ok(PrecisionModel { mean, ..post })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_logdet() {
        let g = factorize(&PrecisionModel::new(SparseMatrix::diagonal(&[2.0; 3]), "d").unwrap()).unwrap();
        assert!((g.log_det() - 3.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn standard_normal_log_density() {
        let m = PrecisionModel::new(SparseMatrix::identity(1), "n").unwrap();
        assert!((log_density(&m, &[0.0]).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12);
        // variance 1/2
        let m2 = PrecisionModel::new(SparseMatrix::diagonal(&[2.0]), "n").unwrap();
        assert!((log_density(&m2, &[0.0]).unwrap() + 0.572_364_942_924_700_1).abs() < 1e-12);
        // variance 1/4
        let m4 = PrecisionModel::new(SparseMatrix::diagonal(&[4.0]), "n").unwrap();
        assert!((log_density(&m4, &[0.0]).unwrap() + 0.225_791_352_644_727_3).abs() < 1e-12);
    }

    #[test]
    fn solve_diag() {
        let g = factorize(&PrecisionModel::new(SparseMatrix::diagonal(&[2.0; 4]), "d").unwrap()).unwrap();
        let x = g.solve(&[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!(x.iter().zip([1.0, 2.0, 3.0, 4.0]).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(matches!(g.solve(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dependent_constraints_are_dropped() {
        let r = |v: Vec<f64>| SparseVector::new(3, v.into_iter().enumerate().collect());
        let c = Constraints::new(vec![r(vec![1.0, 1.0, 0.0]), r(vec![0.0, 0.0, 1.0]), r(vec![1.0, 1.0, 1.0])], vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn correction_is_idempotent() {
        let q = SparseMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 3.0), (2, 2, 1.5), (0, 1, 0.5), (1, 0, 0.5)]);
        let m = PrecisionModel::new(q, "t").unwrap().with_constraints(Constraints::sum_to_zero(3)).unwrap();
        let g = factorize(&m).unwrap();
        let mut x = vec![0.3, -1.2, 2.0];
        g.correct(&mut x);
        let once = x.clone();
        g.correct(&mut x);
        assert!(once.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(x.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn no_observations_returns_prior() {
        let m = PrecisionModel::new(SparseMatrix::identity(2), "p").unwrap();
        let post = condition_gaussian(&m, &SparseMatrix::zeros(0, 2), &[], 1.0).unwrap();
        assert_eq!(post, m);
    }
}
