//! Finite element matrices for piecewise linear basis functions and the
//! precision matrices of SPDE-defined Matérn fields built from them.

mod assess;
mod barrier;
mod matern;
mod nig;
mod precision;
pub mod special;

pub use assess::{assess_correlation, AssessOptions, Assessment, ErrorBin};
pub use barrier::{assemble_barrier_precision, barrier_precision_matrix, BarrierSpec, DEFAULT_RANGE_FRACTION};
pub use matern::{kappa_from_range, log_sigma_for_tau, log_tau_for_sigma, matern_correlation, matern_covariance, MaternParams, SpdeParams};
pub use nig::{simulate_nig, simulate_nig_draws, NigDraw};
pub use precision::{assemble_precision, FemMatrices, NonstatSpec};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::SparseMatrix;

/// Symmetric positive definite 2×2 diffusion tensor.
pub type Anisotropy = [[f64; 2]; 2];

pub fn check_anisotropy(h: &Anisotropy) -> Result<()> {
    let ok = h.iter().flatten().all(|v| v.is_finite()) && h[0][1] == h[1][0] && h[0][0] > 0.0 && h[0][0] * h[1][1] - h[0][1] * h[1][0] > 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::NonSpdAnisotropy)
    }
}

/// Lumped mass: `C_ii = Σ_{T ∋ i} |T| / 3`, returned as the diagonal.
pub fn mass_diagonal(mesh: &Mesh) -> Vec<f64> {
    let mut c = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let a = mesh.triangle_area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            c[v] += a;
        }
    }
    c
}

pub fn assemble_mass(mesh: &Mesh) -> SparseMatrix {
    SparseMatrix::diagonal(&mass_diagonal(mesh))
}

/// Local stiffness entries `|T| ∇φ_i · H ∇φ_j` for one triangle.
pub(crate) fn local_stiffness(p: [[f64; 2]; 3], h: Option<&Anisotropy>) -> [[f64; 3]; 3] {
    // ∇φ_i = rot(e_i) / (2|T|), e_i the edge opposite vertex i.
    let e: [[f64; 2]; 3] = std::array::from_fn(|i| {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        [-(b[1] - a[1]), b[0] - a[0]]
    });
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let denom = 2.0 * area2;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = match h {
                None => e[i][0] * e[j][0] + e[i][1] * e[j][1],
                Some(h) => {
                    let hx = h[0][0] * e[j][0] + h[0][1] * e[j][1];
                    let hy = h[1][0] * e[j][0] + h[1][1] * e[j][1];
                    e[i][0] * hx + e[i][1] * hy
                }
            } / denom;
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// Stiffness `G_ij = ⟨∇φ_i, H ∇φ_j⟩` (H = I when `None`), optionally with
/// a per-triangle weight.
pub(crate) fn stiffness_weighted(mesh: &Mesh, h: Option<&Anisotropy>, weight: Option<&[f64]>) -> SparseMatrix {
    let mut trip = Vec::with_capacity(9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let k = local_stiffness(mesh.triangle_points(t), h);
        let w = weight.map_or(1.0, |w| w[t]);
        for i in 0..3 {
            for j in 0..3 {
                trip.push((tri[i], tri[j], if weight.is_some() { w * k[i][j] } else { k[i][j] }));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.n_vertices(), mesh.n_vertices(), &trip)
}

pub fn assemble_stiffness(mesh: &Mesh, h: Option<&Anisotropy>) -> Result<SparseMatrix> {
    if let Some(h) = h {
        check_anisotropy(h)?;
    }
    Ok(stiffness_weighted(mesh, h, None))
}
