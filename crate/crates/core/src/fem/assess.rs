//! Compare correlations of a discretised Matérn field with the exact
//! Matérn correlation, binned by distance.

use super::{assemble_precision, matern_correlation, MaternParams};
use crate::error::{Error, Result};
use crate::gmrf::factorize;
use crate::mesh::geometry::dist;
use crate::mesh::Mesh;
use crate::par;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessOptions {
    /// Pairs are compared for distances in `[d_min, d_max]`.
    pub d_min: f64,
    pub d_max: f64,
    pub n_bins: usize,
    /// Upper bound on the number of reference nodes.
    pub max_refs: usize,
    /// `[xmin, ymin, xmax, ymax]`; only nodes inside are used. Defaults to
    /// the bounding box of the mesh.
    #[serde(default)]
    pub region: Option<[f64; 4]>,
}

impl AssessOptions {
    /// Distances from `0.2 r` to `2 r`, 12 bins.
    pub fn for_range(range: f64) -> Self {
        AssessOptions { d_min: 0.2 * range, d_max: 2.0 * range, n_bins: 12, max_refs: 40, region: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBin {
    pub d_lo: f64,
    pub d_hi: f64,
    pub count: usize,
    /// Mean of (discrete − exact) correlation.
    pub mean_error: f64,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub bins: Vec<ErrorBin>,
    pub max_abs_error: f64,
    pub n_refs: usize,
    pub n_pairs: usize,
    /// Marginal sd at every mesh node.
    pub marginal_sd: Vec<f64>,
}

/// Reference nodes: those in the central half of `region`, thinned evenly
/// to at most `max_refs`.
fn reference_nodes(mesh: &Mesh, region: [f64; 4], max_refs: usize) -> Vec<usize> {
    let [x0, y0, x1, y1] = region;
    let (qx, qy) = (0.25 * (x1 - x0), 0.25 * (y1 - y0));
    let central: Vec<usize> = (0..mesh.n_vertices())
        .filter(|&v| {
            let p = mesh.vertices[v];
            p[0] >= x0 + qx && p[0] <= x1 - qx && p[1] >= y0 + qy && p[1] <= y1 - qy
        })
        .collect();
    let step = central.len().div_ceil(max_refs.max(1)).max(1);
    central.into_iter().step_by(step).collect()
}

pub fn assess_correlation(mesh: &Mesh, params: &MaternParams, opts: &AssessOptions) -> Result<Assessment> {
    let spde = params.to_spde()?;
    if !(opts.d_min >= 0.0 && opts.d_max > opts.d_min && opts.n_bins > 0) {
        return Err(Error::InvalidParameter("need 0 <= d_min < d_max and n_bins > 0".into()));
    }
    let region = opts.region.unwrap_or_else(|| {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in &mesh.vertices {
            b = [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])];
        }
        b
    });
    let inside = |v: usize| {
        let p = mesh.vertices[v];
        p[0] >= region[0] && p[0] <= region[2] && p[1] >= region[1] && p[1] <= region[3]
    };
    let g = factorize(&assemble_precision(mesh, &spde, None, None)?)?;
    let var = g.marginal_variances();
    let refs = reference_nodes(mesh, region, opts.max_refs);
    if refs.is_empty() {
        return Err(Error::InvalidParameter("no mesh nodes in the central part of the region".into()));
    }
    let width = (opts.d_max - opts.d_min) / opts.n_bins as f64;
    let per_ref = par::map_slice(&refs, |&i| {
        let col = g.covariance_column(i);
        let mut acc = vec![(0usize, 0.0f64, 0.0f64, 0.0f64); opts.n_bins];
        for j in (0..mesh.n_vertices()).filter(|&j| j != i && inside(j)) {
            let d = dist(mesh.vertices[i], mesh.vertices[j]);
            if d < opts.d_min || d > opts.d_max {
                continue;
            }
            let e = col[j] / (var[i] * var[j]).sqrt() - matern_correlation(d, params.range, params.nu);
            let a = &mut acc[(((d - opts.d_min) / width) as usize).min(opts.n_bins - 1)];
            a.0 += 1;
            a.1 += e;
            a.2 = a.2.max(e.abs());
            a.3 += e.abs();
        }
        acc
    });
    let mut bins: Vec<ErrorBin> = (0..opts.n_bins)
        .map(|k| ErrorBin {
            d_lo: opts.d_min + k as f64 * width,
            d_hi: opts.d_min + (k + 1) as f64 * width,
            count: 0,
            mean_error: 0.0,
            mean_abs_error: 0.0,
            max_abs_error: 0.0,
        })
        .collect();
    for acc in per_ref {
        for (b, (n, s, m, a)) in bins.iter_mut().zip(acc) {
            b.count += n;
            b.mean_error += s;
            b.mean_abs_error += a;
            b.max_abs_error = b.max_abs_error.max(m);
        }
    }
    for b in &mut bins {
        if b.count > 0 {
            b.mean_error /= b.count as f64;
            b.mean_abs_error /= b.count as f64;
        }
    }
    Ok(Assessment {
        max_abs_error: bins.iter().map(|b| b.max_abs_error).fold(0.0, f64::max),
        n_pairs: bins.iter().map(|b| b.count).sum(),
        n_refs: refs.len(),
        bins,
        marginal_sd: var.iter().map(|v| v.sqrt()).collect(),
    })
}
