use super::fit::FitResult;
use super::laplace::laplace;
use super::model::{LatentModel, Likelihood};
use crate::error::{check_dim, Error, Result};
use crate::gmrf::Gmrf;
use crate::par;
use crate::rng::stream_rng;
use crate::sparse::SparseMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const QUANTILE_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Per-location summary of predictive draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// One vector per level in [`QUANTILE_LEVELS`].
    pub quantiles: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub n_draws: usize,
    pub seed: u64,
    pub quantile_levels: Vec<f64>,
    /// Linear predictor `A x`.
    pub linear: Summary,
    /// Inverse-link scale (Poisson mean rate); absent for Gaussian models.
    pub response: Option<Summary>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(draws: &[Vec<f64>], m: usize) -> Summary {
    let cols: Vec<(f64, f64, Vec<f64>)> = par::map_range(m, |j| {
        let mut v: Vec<f64> = draws.iter().map(|d| d[j]).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        v.sort_by(f64::total_cmp);
        (mean, var.sqrt(), QUANTILE_LEVELS.iter().map(|&p| quantile_sorted(&v, p)).collect())
    });
    Summary {
        mean: cols.iter().map(|c| c.0).collect(),
        sd: cols.iter().map(|c| c.1).collect(),
        quantiles: (0..QUANTILE_LEVELS.len()).map(|q| cols.iter().map(|c| c.2[q]).collect()).collect(),
    }
}

/// Predictive draws of `a_new · x`: each draw picks a hyperparameter point
/// by its weight, then the latent field from that point's Gaussian
/// approximation. Draw `d` uses stream `d` of `seed`.
pub fn predict(model: &LatentModel, fit: &FitResult, a_new: &SparseMatrix, n_draws: usize, seed: u64) -> Result<Prediction> {
    check_dim(model.latent_dim(), a_new.n_cols())?;
    if n_draws == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    if fit.points.is_empty() {
        return Err(Error::InvalidParameter("fit has no hyperparameter points".into()));
    }
    let cumulative: Vec<f64> = fit
        .points
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p.weight;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    let picks: Vec<usize> = (0..n_draws)
        .map(|d| {
            let mut rng = stream_rng(seed, d as u64);
            let u: f64 = rng.random::<f64>() * total;
            cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
        })
        .collect();
    let mut used: Vec<usize> = picks.clone();
    used.sort_unstable();
    used.dedup();
    let approx: BTreeMap<usize, Gmrf> =
        par::map_slice(&used, |&k| laplace(model, &fit.points[k].theta).map(|f| (k, f.posterior))).into_iter().collect::<Result<_>>()?;
    let n = model.latent_dim();
    let draws: Vec<Vec<f64>> = par::map_range(n_draws, |d| {
        let mut rng = stream_rng(seed, d as u64);
        let _: f64 = rng.random();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        a_new.matvec(&approx[&picks[d]].draw_from_noise(&z))
    });
    let m = a_new.n_rows();
    let linear = summarize(&draws, m);
    let response = match model.likelihood {
        Likelihood::Gaussian { .. } => None,
        Likelihood::Poisson { .. } => {
            let linked: Vec<Vec<f64>> = draws.iter().map(|d| d.iter().map(|v| v.exp()).collect()).collect();
            Some(summarize(&linked, m))
        }
    };
    Ok(Prediction { n_draws, seed, quantile_levels: QUANTILE_LEVELS.to_vec(), linear, response })
}
