use super::{besag_precision, AdjacencyGraph};
use crate::error::{Error, Result};
use crate::gmrf::{pivot_columns, Constraints, PrecisionModel};
use crate::sparse::{SparseMatrix, SparseVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TemporalKind {
    Iid,
    Ar1 { rho: f64 },
    Rw1,
    Rw2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalModel {
    #[serde(flatten)]
    pub kind: TemporalKind,
    pub length: usize,
}

impl TemporalModel {
    pub fn new(kind: TemporalKind, length: usize) -> Result<Self> {
        let t = TemporalModel { kind, length };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let needed = match self.kind {
            TemporalKind::Iid | TemporalKind::Ar1 { .. } => 1,
            TemporalKind::Rw1 => 2,
            TemporalKind::Rw2 => 3,
        };
        if self.length < needed {
            return Err(Error::TooShort { needed, got: self.length });
        }
        if let TemporalKind::Ar1 { rho } = self.kind {
            if !(rho.abs() < 1.0) {
                return Err(Error::InvalidParameter(format!("ar1 needs |rho| < 1, got {rho}")));
            }
        }
        Ok(())
    }
}

/// Precision of a temporal component. `ar1` has unit marginal variance;
/// `rw1` carries a sum-to-zero constraint and `rw2` sum and linear-drift
/// constraints.
pub fn temporal_precision(t: &TemporalModel) -> Result<PrecisionModel> {
    t.validate()?;
    let n = t.length;
    match t.kind {
        TemporalKind::Iid => PrecisionModel::new(SparseMatrix::identity(n), format!("iid T={n}")),
        TemporalKind::Ar1 { rho } => {
            let s = 1.0 / (1.0 - rho * rho);
            let mut trip = Vec::with_capacity(3 * n);
            for i in 0..n {
                let d = if i == 0 || i == n - 1 { 1.0 } else { 1.0 + rho * rho };
                trip.push((i, i, s * d));
                if i + 1 < n && rho != 0.0 {
                    trip.push((i, i + 1, -s * rho));
                    trip.push((i + 1, i, -s * rho));
                }
            }
            PrecisionModel::new(SparseMatrix::from_triplets(n, n, &trip), format!("ar1 T={n} rho={rho}"))
        }
        TemporalKind::Rw1 => {
            let mut m = besag_precision(&AdjacencyGraph::path(n), None)?;
            m.label = format!("rw1 T={n}");
            Ok(m)
        }
        TemporalKind::Rw2 => {
            let rows: Vec<SparseVector> = (0..n - 2).map(|i| SparseVector::new(n, vec![(i, 1.0), (i + 1, -2.0), (i + 2, 1.0)])).collect();
            let l = SparseMatrix::from_rows(n, &rows)?;
            let q = l.transpose().mul(&l)?;
            let c = Constraints::from_independent(
                &[SparseVector::new(n, (0..n).map(|i| (i, 1.0)).collect()), SparseVector::new(n, (0..n).map(|i| (i, i as f64)).collect())],
                vec![0.0; 2],
                n,
            )?;
            Ok(PrecisionModel::new(q, format!("rw2 T={n}"))?.with_constraints(c)?.intrinsic(2))
        }
    }
}

/// Kronecker rows `a ⊗ e_s` (`left = true`) or `e_t ⊗ b` over an
/// `n_left · n_right` vector.
fn kron_rows(row: &SparseVector, other_len: usize, index: usize, left: bool) -> SparseVector {
    let entries = row.indices.iter().zip(&row.values).map(|(&k, &v)| if left { (k * other_len + index, v) } else { (index * row.len + k, v) }).collect();
    SparseVector::new(row.len * other_len, entries)
}

/// `Q_time ⊗ Q_space` on the time-major vector (index `t · n + s`).
///
/// Constraints are `(C_time ⊗ I)` together with `(I ⊗ C_space)`, with the
/// overlap removed: space constraints are kept only at time points that are
/// not pivot columns of `C_time`.
pub fn kronecker_precision(time: &PrecisionModel, space: &PrecisionModel) -> Result<PrecisionModel> {
    let (nt, ns) = (time.dim(), space.dim());
    let q = time.q.kron(&space.q);
    let mut rows = Vec::new();
    let mut keep_times: Vec<usize> = (0..nt).collect();
    if let Some(ct) = &time.constraints {
        let dense: Vec<Vec<f64>> = (0..ct.len()).map(|i| ct.matrix().row_vector(i).to_dense()).collect();
        let piv = pivot_columns(&dense);
        keep_times.retain(|t| !piv.contains(t));
        for i in 0..ct.len() {
            let r = ct.matrix().row_vector(i);
            rows.extend((0..ns).map(|s| kron_rows(&r, ns, s, true)));
        }
    }
    if let Some(cs) = &space.constraints {
        for &t in &keep_times {
            for i in 0..cs.len() {
                rows.push(kron_rows(&cs.matrix().row_vector(i), nt, t, false));
            }
        }
    }
    let (rt, rs) = (time.rank_deficiency, space.rank_deficiency);
    let mut m = PrecisionModel::new(q, format!("({}) x ({})", time.label, space.label))?;
    if !rows.is_empty() {
        let k = rows.len();
        m = m.with_constraints(Constraints::from_independent(&rows, vec![0.0; k], nt * ns)?)?;
    }
    Ok(m.intrinsic(rt * ns + nt * rs - rt * rs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_zero_is_identity() {
        let m = temporal_precision(&TemporalModel::new(TemporalKind::Ar1 { rho: 0.0 }, 5).unwrap()).unwrap();
        assert_eq!(m.q, SparseMatrix::identity(5));
    }

    #[test]
    fn rw1_is_path_besag() {
        let a = temporal_precision(&TemporalModel::new(TemporalKind::Rw1, 3).unwrap()).unwrap();
        let b = besag_precision(&AdjacencyGraph::path(3), None).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.constraints, b.constraints);
    }

    #[test]
    fn rw2_annihilates_lines() {
        let m = temporal_precision(&TemporalModel::new(TemporalKind::Rw2, 6).unwrap()).unwrap();
        let line: Vec<f64> = (0..6).map(|i| 2.0 - 0.5 * i as f64).collect();
        assert!(m.q.matvec(&line).iter().all(|v| v.abs() < 1e-12));
        assert_eq!(m.q.get(0, 0), 1.0);
        assert_eq!(m.q.get(2, 2), 6.0);
    }

    #[test]
    fn invalid_models() {
        assert!(TemporalModel::new(TemporalKind::Rw2, 2).is_err());
        assert!(TemporalModel::new(TemporalKind::Rw1, 1).is_err());
        assert!(TemporalModel::new(TemporalKind::Ar1 { rho: 1.0 }, 4).is_err());
    }

    #[test]
    fn json_form() {
        let t = TemporalModel::new(TemporalKind::Ar1 { rho: 0.5 }, 4).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"kind":"ar1","rho":0.5,"length":4}"#);
        assert_eq!(serde_json::from_str::<TemporalModel>(&s).unwrap(), t);
    }
}
