//! Barrier model: the range drops to a small fraction inside barrier
//! triangles, so correlation does not travel through them.
//!
//! With triangle-wise constant range `r_T`, the operator
//! `u − ∇·(r²/8)∇u = r √(π/2) σ W` discretises to
//!
//! ```text
//! Q = σ⁻² (C + G_r) ((π/2) Ã_r)⁻¹ (C + G_r)
//! G_r = Σ_T (r_T² / 8) G_T,     Ã_r = diag(Σ_{T ∋ i} r_T² |T| / 3)
//! ```
//!
//! For constant `r` this is exactly the α = 2 stationary precision with
//! `κ² = 8/r²` and `τ² = r² / (32 π σ²)`.

use super::{mass_diagonal, stiffness_weighted};
use crate::error::{Error, Result};
use crate::gmrf::{CholeskyFactor, PrecisionModel};
use crate::mesh::geometry::point_in_polygon;
use crate::mesh::{Mesh, Point};
use crate::sparse::SparseMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_RANGE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub barrier_triangles: Vec<usize>,
    pub range_normal: f64,
    #[serde(default = "default_fraction")]
    pub range_fraction_in_barrier: f64,
}

fn default_fraction() -> f64 {
    DEFAULT_RANGE_FRACTION
}

impl BarrierSpec {
    pub fn new(barrier_triangles: Vec<usize>, range_normal: f64) -> Self {
        BarrierSpec { barrier_triangles, range_normal, range_fraction_in_barrier: DEFAULT_RANGE_FRACTION }
    }

    /// Barrier made of the triangles whose centroid lies inside `polygon`.
    pub fn from_polygon(mesh: &Mesh, polygon: &[Point], range_normal: f64) -> Self {
        let tris = (0..mesh.n_triangles()).filter(|&t| point_in_polygon(mesh.centroid(t), polygon)).collect();
        BarrierSpec::new(tris, range_normal)
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if !(self.range_normal > 0.0 && self.range_normal.is_finite()) {
            return Err(Error::InvalidParameter("range_normal must be positive".into()));
        }
        let f = self.range_fraction_in_barrier;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidParameter(format!("range_fraction_in_barrier must lie in (0, 1], got {f}")));
        }
        if let Some(&t) = self.barrier_triangles.iter().find(|&&t| t >= mesh.n_triangles()) {
            return Err(Error::InvalidParameter(format!("barrier triangle {t} is not in the mesh")));
        }
        Ok(())
    }

    /// Range of each triangle.
    pub fn triangle_ranges(&self, mesh: &Mesh) -> Vec<f64> {
        let mut r = vec![self.range_normal; mesh.n_triangles()];
        for &t in &self.barrier_triangles {
            r[t] = self.range_fraction_in_barrier * self.range_normal;
        }
        r
    }
}

/// Barrier precision without the positive-definiteness probe.
pub fn barrier_precision_matrix(mesh: &Mesh, spec: &BarrierSpec, sigma: f64) -> Result<SparseMatrix> {
    spec.validate(mesh)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter("sigma must be positive".into()));
    }
    let r = spec.triangle_ranges(mesh);
    let w: Vec<f64> = r.iter().map(|r| r * r / 8.0).collect();
    let c = mass_diagonal(mesh);
    let m = SparseMatrix::diagonal(&c).add_scaled(1.0, &stiffness_weighted(mesh, None, Some(&w)), 1.0)?;
    let mut a = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let v = r[t] * r[t] * mesh.triangle_area(t) / 3.0;
        tri.iter().for_each(|&i| a[i] += v);
    }
    let d: Vec<f64> = a.iter().map(|a| 2.0 / (PI * a)).collect();
    Ok(m.mul_diag(Some(&d), &m)?.scale(1.0 / (sigma * sigma)))
}

pub fn assemble_barrier_precision(mesh: &Mesh, spec: &BarrierSpec, sigma: f64) -> Result<PrecisionModel> {
    let q = barrier_precision_matrix(mesh, spec, sigma)?;
    CholeskyFactor::new(&q, 0.0)?;
    PrecisionModel::new(
        q,
        format!(
            "barrier range={} fraction={} sigma={} barrier_triangles={}",
            spec.range_normal,
            spec.range_fraction_in_barrier,
            sigma,
            spec.barrier_triangles.len()
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{FemMatrices, MaternParams};
    use crate::mesh::{build_mesh, MeshConfig};

    #[test]
    fn empty_barrier_is_stationary() {
        let sq = [[0.0, 0.0], [4.0, 0.0], [4.0, 3.0], [0.0, 3.0]];
        let m = build_mesh(&sq, None, &MeshConfig::with_max_edge(0.5, 0.0)).unwrap();
        let qb = barrier_precision_matrix(&m, &BarrierSpec::new(vec![], 1.5), 0.7).unwrap();
        let p = MaternParams::new(1.5, 0.7, 1.0).unwrap().to_spde().unwrap();
        let qs = FemMatrices::new(&m, None).unwrap().stationary(&p).unwrap();
        assert!(qb.same_pattern(&qs));
        assert!(qb.max_abs_diff(&qs) <= 1e-12 * qs.max_abs());
        assert!(qb.is_symmetric());
    }

    #[test]
    fn rejects_unknown_triangle() {
        let m = Mesh { vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], triangles: vec![[0, 1, 2]], boundary_loops: vec![] };
        assert!(barrier_precision_matrix(&m, &BarrierSpec::new(vec![3], 1.0), 1.0).is_err());
    }
}
