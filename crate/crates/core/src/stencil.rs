//! Finite-difference operators on regular grids.

use crate::error::{Error, Result};
use crate::gmrf::{Constraints, PrecisionModel};
use crate::sparse::SparseMatrix;
use serde::{Deserialize, Serialize};

/// `rows × cols` grid with spacing `h`, indexed `i · cols + j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub rows: usize,
    pub cols: usize,
    pub h: f64,
    pub periodic: bool,
}

impl Grid2D {
    pub fn new(rows: usize, cols: usize, h: f64) -> Result<Self> {
        let g = Grid2D { rows, cols, h, periodic: true };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 3 || self.cols < 3 {
            return Err(Error::TooShort { needed: 3, got: self.rows.min(self.cols) });
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {}", self.h)));
        }
        if !self.periodic {
            return Err(Error::InvalidParameter("only periodic grids are supported".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }
}

/// `L₁ = κ² I + D` with `D` the periodic five-point negative Laplacian:
/// `4/h²` on the diagonal, `−1/h²` for the four first-order neighbours.
pub fn grid_operator_l1(grid: &Grid2D, kappa: f64) -> Result<SparseMatrix> {
    grid.validate()?;
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::InvalidParameter(format!("kappa must be non-negative, got {kappa}")));
    }
    let (m, n) = (grid.rows, grid.cols);
    let h2 = grid.h * grid.h;
    let mut t = Vec::with_capacity(5 * grid.len());
    for i in 0..m {
        for j in 0..n {
            let a = grid.index(i, j);
            t.push((a, a, kappa * kappa + 4.0 / h2));
            for b in [grid.index((i + m - 1) % m, j), grid.index((i + 1) % m, j), grid.index(i, (j + n - 1) % n), grid.index(i, (j + 1) % n)] {
                t.push((a, b, -1.0 / h2));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(grid.len(), grid.len(), &t))
}

/// Stencil of `h² L₁`: rows north, centre, south.
pub fn l1_stencil(kappa: f64, h: f64) -> [[f64; 3]; 3] {
    [[0.0, -1.0, 0.0], [-1.0, kappa * kappa * h * h + 4.0, -1.0], [0.0, -1.0, 0.0]]
}

/// `τ² L₁ᵀ C⁻¹ L₁` with grid mass `C = h² I`, the grid analogue of the
/// α = 2 SPDE precision.
pub fn grid_precision(grid: &Grid2D, kappa: f64, tau: f64) -> Result<PrecisionModel> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonPositivePrecision(tau));
    }
    let l = grid_operator_l1(grid, kappa)?;
    let q = l.transpose().mul(&l)?.scale(tau * tau / (grid.h * grid.h));
    let m = PrecisionModel::new(q, format!("grid {}x{} h={} kappa={kappa}", grid.rows, grid.cols, grid.h))?;
    if kappa == 0.0 {
        m.intrinsic(1).with_constraints(Constraints::sum_to_zero(grid.len()))
    } else {
        Ok(m)
    }
}

/// Central second difference `(f_{i−1} − 2 f_i + f_{i+1}) / h²` at the
/// interior points.
pub fn second_derivative_1d(values: &[f64], h: f64) -> Result<Vec<f64>> {
    if values.len() < 3 {
        return Err(Error::TooShort { needed: 3, got: values.len() });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("spacing must be positive, got {h}")));
    }
    let h2 = h * h;
    Ok(values.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]) / h2).collect())
}
