use super::AdjacencyGraph;
use crate::error::{Error, Result};
#[cfg(test)]
use crate::gmrf::factorize;
use crate::gmrf::{projected_marginal_variances, Constraints, PrecisionModel};
use crate::sparse::{SparseMatrix, SparseVector};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Edge weights keyed by `(min(i, j), max(i, j))`; missing edges weigh 1.
pub type EdgeWeights = HashMap<(usize, usize), f64>;

/// Largest BYM2 mixing weight used internally; `w = 1` is clamped to it
/// because the joint precision has a `1 / (1 − w)` factor.
pub const BYM2_MAX_WEIGHT: f64 = 1.0 - 1e-4;

fn weight(w: Option<&EdgeWeights>, i: usize, j: usize) -> f64 {
    w.and_then(|w| w.get(&(i.min(j), i.max(j))).copied()).unwrap_or(1.0)
}

/// Structure matrix: `Q_ii = Σ_j w_ij`, `Q_ij = −w_ij` for neighbours.
pub fn besag_structure(g: &AdjacencyGraph, weights: Option<&EdgeWeights>) -> Result<SparseMatrix> {
    if let Some(w) = weights {
        for (&(i, j), &v) in w {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("edge ({i}, {j}) weight {v} must be positive")));
            }
            if i >= g.n() || !g.neighbours(i).contains(&j) {
                return Err(Error::InvalidParameter(format!("weighted pair ({i}, {j}) is not an edge")));
            }
        }
    }
    let mut t = Vec::with_capacity(g.n() + 2 * g.n_edges());
    for i in 0..g.n() {
        let mut d = 0.0;
        for &j in g.neighbours(i) {
            let wij = weight(weights, i, j);
            d += wij;
            t.push((i, j, -wij));
        }
        t.push((i, i, d));
    }
    Ok(SparseMatrix::from_triplets(g.n(), g.n(), &t))
}

fn component_constraints(n: usize, comps: &[Vec<usize>]) -> Result<Constraints> {
    let rows: Vec<SparseVector> = comps.iter().map(|c| SparseVector::new(n, c.iter().map(|&i| (i, 1.0)).collect())).collect();
    let k = rows.len();
    Constraints::from_independent(&rows, vec![0.0; k], n)
}

/// Intrinsic Besag model with one sum-to-zero constraint per connected
/// component. Isolated regions get an independent unit-variance entry.
pub fn besag_precision(g: &AdjacencyGraph, weights: Option<&EdgeWeights>) -> Result<PrecisionModel> {
    let mut q = besag_structure(g, weights)?;
    let (singles, comps): (Vec<_>, Vec<_>) = g.components().into_iter().partition(|c| c.len() == 1);
    if !singles.is_empty() {
        let d: Vec<f64> = (0..g.n()).map(|i| if g.degree(i) == 0 { 1.0 } else { 0.0 }).collect();
        q = q.add_scaled(1.0, &SparseMatrix::diagonal(&d), 1.0)?;
    }
    let c = component_constraints(g.n(), &comps)?;
    Ok(PrecisionModel::new(q, format!("besag n={} components={}", g.n(), comps.len() + singles.len()))?.with_constraints(c)?.intrinsic(comps.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    /// Connected components of the precision's sparsity graph.
    pub components: Vec<Vec<usize>>,
    /// Factor each component's block was multiplied by (1 for singletons).
    pub factors: Vec<f64>,
    /// Isolated nodes, left unscaled.
    pub singletons: Vec<usize>,
}

fn pattern_components(q: &SparseMatrix) -> Vec<Vec<usize>> {
    let n = q.n_rows();
    let nb: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let (c, v) = q.row(i);
            c.iter().zip(v).filter(|&(&j, &x)| j != i && x != 0.0).map(|(&j, _)| j).collect()
        })
        .collect();
    AdjacencyGraph::new(nb).map(|g| g.components()).unwrap_or_else(|_| (0..n).map(|i| vec![i]).collect())
}

/// Multiply each connected block of `Q` by the geometric mean of its
/// constrained marginal variances, so that afterwards the geometric mean
/// is 1 in every component.
///
/// Every component with more than one node must have the constant vector
/// in the null space of its block (as Besag structures do).
pub fn scale_besag(model: &PrecisionModel) -> Result<(PrecisionModel, ScaleReport)> {
    let n = model.dim();
    let components = pattern_components(&model.q);
    let basis: Vec<Vec<f64>> = components
        .iter()
        .filter(|c| c.len() > 1)
        .map(|c| {
            let mut v = vec![0.0; n];
            c.iter().for_each(|&i| v[i] = 1.0);
            v
        })
        .collect();
    let tol = 1e-10 * model.q.max_abs();
    for v in &basis {
        if model.q.matvec(v).iter().any(|r| r.abs() > tol) {
            return Err(Error::InvalidParameter("component rows do not sum to zero; not a Besag structure".into()));
        }
    }
    let var = projected_marginal_variances(&model.q, &basis)?;
    let mut s = vec![1.0; model.dim()];
    let mut factors = Vec::with_capacity(components.len());
    let mut singletons = Vec::new();
    for c in &components {
        if c.len() == 1 {
            singletons.push(c[0]);
            factors.push(1.0);
            continue;
        }
        let gm = (c.iter().map(|&i| var[i].ln()).sum::<f64>() / c.len() as f64).exp();
        c.iter().for_each(|&i| s[i] = gm.sqrt());
        factors.push(gm);
    }
    let scaled = PrecisionModel { q: model.q.scale_rows_cols(&s, &s), label: format!("scaled {}", model.label), ..model.clone() };
    Ok((scaled, ScaleReport { components, factors, singletons }))
}

/// BYM2 over the joint vector `(b, u*)` with
/// `b = τ^{-1/2} (√(1 − w) v + √w u*)`, `v` iid standard normal and `u*`
/// the scaled Besag field. Holds the scaled structure for reuse.
#[derive(Debug, Clone)]
pub struct Bym2 {
    scaled: PrecisionModel,
    pub report: ScaleReport,
}

impl Bym2 {
    pub fn new(g: &AdjacencyGraph, weights: Option<&EdgeWeights>) -> Result<Self> {
        let (scaled, report) = scale_besag(&besag_precision(g, weights)?)?;
        Ok(Bym2 { scaled, report })
    }

    pub fn n(&self) -> usize {
        self.scaled.dim()
    }

    pub fn scaled_besag(&self) -> &PrecisionModel {
        &self.scaled
    }

    pub fn precision(&self, tau: f64, w: f64) -> Result<PrecisionModel> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::NonPositivePrecision(tau));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::WeightOutOfRange(w));
        }
        let w = w.min(BYM2_MAX_WEIGHT);
        let n = self.n();
        let a = tau / (1.0 - w);
        let cross = -(w * tau).sqrt() / (1.0 - w);
        let extra = w / (1.0 - w);
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(4 * n + self.scaled.q.nnz());
        for i in 0..n {
            t.push((i, i, a));
            if cross != 0.0 {
                t.push((i, n + i, cross));
                t.push((n + i, i, cross));
            }
            t.push((n + i, n + i, extra));
        }
        t.extend(self.scaled.q.triplets().map(|(i, j, v)| (n + i, n + j, v)));
        let q = SparseMatrix::from_triplets(2 * n, 2 * n, &t);
        let mut m = PrecisionModel::new(q, format!("bym2 n={n} tau={tau} w={w}"))?;
        if let Some(c) = &self.scaled.constraints {
            m = m.with_constraints(c.embed(n, 2 * n))?;
        }
        Ok(m.intrinsic(self.scaled.rank_deficiency))
    }
}

pub fn bym2_precision(g: &AdjacencyGraph, tau: f64, w: f64) -> Result<PrecisionModel> {
    Bym2::new(g, None)?.precision(tau, w)
}
