use super::{check_anisotropy, mass_diagonal, stiffness_weighted, Anisotropy, SpdeParams};
use crate::error::{Error, Result};
use crate::gmrf::{CholeskyFactor, PrecisionModel};
use crate::mesh::Mesh;
use crate::sparse::SparseMatrix;
use serde::{Deserialize, Serialize};

/// Node-wise `log τ(s)` and `log κ(s)` as linear combinations of basis
/// functions evaluated at the mesh nodes (`basis_*[i]` is the row of node i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonstatSpec {
    pub basis_tau: Vec<Vec<f64>>,
    pub theta_tau: Vec<f64>,
    pub basis_kappa: Vec<Vec<f64>>,
    pub theta_kappa: Vec<f64>,
}

impl NonstatSpec {
    /// Constant bases reproducing a stationary model.
    pub fn constant(n: usize, params: &SpdeParams) -> Self {
        NonstatSpec { basis_tau: vec![vec![1.0]; n], theta_tau: vec![params.log_tau], basis_kappa: vec![vec![1.0]; n], theta_kappa: vec![params.log_kappa] }
    }

    fn eval(basis: &[Vec<f64>], theta: &[f64], n: usize, what: &str) -> Result<Vec<f64>> {
        if basis.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: basis.len() });
        }
        basis
            .iter()
            .map(|row| {
                if row.len() != theta.len() {
                    return Err(Error::DimensionMismatch { expected: theta.len(), got: row.len() });
                }
                let v = row.iter().zip(theta).map(|(b, t)| b * t).sum::<f64>().exp();
                if v > 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::InvalidParameter(format!("{what}(s) is not positive and finite")))
                }
            })
            .collect()
    }

    /// `(κ_i, τ_i)` at the nodes.
    pub fn node_values(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((Self::eval(&self.basis_kappa, &self.theta_kappa, n, "kappa")?, Self::eval(&self.basis_tau, &self.theta_tau, n, "tau")?))
    }
}

/// Mass diagonal and stiffness of a mesh, reused across parameter values.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub c: Vec<f64>,
    pub g: SparseMatrix,
}

impl FemMatrices {
    pub fn new(mesh: &Mesh, h: Option<&Anisotropy>) -> Result<Self> {
        if let Some(h) = h {
            check_anisotropy(h)?;
        }
        Ok(FemMatrices { c: mass_diagonal(mesh), g: stiffness_weighted(mesh, h, None) })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// `K = diag(κ_i²) C + G`.
    pub fn k_matrix(&self, kappa: &[f64]) -> Result<SparseMatrix> {
        crate::error::check_dim(self.n(), kappa.len())?;
        let d: Vec<f64> = kappa.iter().zip(&self.c).map(|(k, c)| k * k * c).collect();
        SparseMatrix::diagonal(&d).add_scaled(1.0, &self.g, 1.0)
    }

    /// `T Q_α T` with `Q_1 = K`, `Q_2 = K C⁻¹ K`, `Q_α = K C⁻¹ Q_{α−2} C⁻¹ K`
    /// and `T = diag(τ)`.
    pub fn precision(&self, kappa: &[f64], tau: &[f64], alpha: u32) -> Result<SparseMatrix> {
        if !(1..=4).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha must be 1..=4, got {alpha}")));
        }
        crate::error::check_dim(self.n(), tau.len())?;
        let k = self.k_matrix(kappa)?;
        let cinv: Vec<f64> = self.c.iter().map(|c| 1.0 / c).collect();
        let mut q = if alpha % 2 == 1 { k.clone() } else { k.mul_diag(Some(&cinv), &k)? };
        for _ in 0..(alpha - 1) / 2 {
            let inner = q.mul_diag(Some(&cinv), &k)?;
            q = k.mul_diag(Some(&cinv), &inner)?.mirror_upper();
        }
        Ok(q.scale_rows_cols(tau, tau))
    }

    pub fn stationary(&self, params: &SpdeParams) -> Result<SparseMatrix> {
        params.validate()?;
        let n = self.n();
        self.precision(&vec![params.kappa(); n], &vec![params.tau(); n], params.alpha)
    }

    pub fn nonstationary(&self, spec: &NonstatSpec, alpha: u32) -> Result<SparseMatrix> {
        let (kappa, tau) = spec.node_values(self.n())?;
        self.precision(&kappa, &tau, alpha)
    }
}

/// SPDE precision on `mesh`. With `nonstat`, κ and τ come from the basis
/// expansion and only `params.alpha` is used. The result is certified SPD
/// by a Cholesky factorization.
pub fn assemble_precision(mesh: &Mesh, params: &SpdeParams, nonstat: Option<&NonstatSpec>, h: Option<&Anisotropy>) -> Result<PrecisionModel> {
    params.validate()?;
    let fem = FemMatrices::new(mesh, h)?;
    let q = match nonstat {
        Some(spec) => fem.nonstationary(spec, params.alpha)?,
        None => fem.stationary(params)?,
    };
    CholeskyFactor::new(&q, 0.0)?;
    let label = match nonstat {
        Some(_) => format!("spde nonstationary alpha={}", params.alpha),
        None => format!("spde alpha={} kappa={} tau={}", params.alpha, params.kappa(), params.tau()),
    };
    PrecisionModel::new(q, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshConfig};

    fn mesh() -> Mesh {
        let sq = [[0.0, 0.0], [3.0, 0.0], [3.0, 2.0], [0.0, 2.0]];
        build_mesh(&sq, None, &MeshConfig::with_max_edge(0.5, 0.0)).unwrap()
    }

    #[test]
    fn alpha_two_closed_form() {
        let m = mesh();
        let fem = FemMatrices::new(&m, None).unwrap();
        let (kappa, tau) = (1.7f64, 0.6f64);
        let q = fem.stationary(&SpdeParams::new(kappa, tau, 2).unwrap()).unwrap();
        let cinv: Vec<f64> = fem.c.iter().map(|c| 1.0 / c).collect();
        let g2 = fem.g.mul_diag(Some(&cinv), &fem.g).unwrap();
        let closed =
            SparseMatrix::diagonal(&fem.c).add_scaled(kappa.powi(4), &fem.g, 2.0 * kappa * kappa).unwrap().add_scaled(1.0, &g2, 1.0).unwrap().scale(tau * tau);
        assert!(q.max_abs_diff(&closed) <= 1e-12 * closed.max_abs());
    }

    #[test]
    fn symmetric_and_positive_for_all_orders() {
        let m = mesh();
        for alpha in 1..=4 {
            let p = SpdeParams::new(2.0, 0.3, alpha).unwrap();
            let q = assemble_precision(&m, &p, None, None).unwrap();
            assert!(q.q.is_symmetric(), "alpha {alpha}");
        }
    }

    #[test]
    fn constant_basis_is_stationary() {
        let m = mesh();
        let p = SpdeParams::new(1.3, 0.8, 2).unwrap();
        let a = assemble_precision(&m, &p, None, None).unwrap();
        let b = assemble_precision(&m, &p, Some(&NonstatSpec::constant(m.n_vertices(), &p)), None).unwrap();
        assert_eq!(a.q, b.q);
    }
}
