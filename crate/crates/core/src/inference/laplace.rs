use super::model::{LatentModel, Likelihood};
use crate::error::{Error, Result};
use crate::gmrf::{Gmrf, PrecisionModel};
use crate::sparse::SparseMatrix;
use statrs::function::gamma::ln_gamma;

pub const NEWTON_TOL: f64 = 1e-8;
pub const NEWTON_MAX_ITER: usize = 100;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log-likelihood, its gradient in `η` and the negative second derivative.
fn likelihood_terms(lik: &Likelihood, y: &[f64], eta: &[f64], log_noise: Option<f64>) -> (f64, Vec<f64>, Vec<f64>) {
    match lik {
        Likelihood::Gaussian { .. } => {
            let lt = log_noise.expect("gaussian noise precision");
            let t = lt.exp();
            let mut ll = 0.0;
            let grad: Vec<f64> = y
                .iter()
                .zip(eta)
                .map(|(yi, e)| {
                    let r = yi - e;
                    ll += 0.5 * lt - 0.5 * LN_2PI - 0.5 * t * r * r;
                    t * r
                })
                .collect();
            (ll, grad, vec![t; y.len()])
        }
        Likelihood::Poisson { exposure } => {
            let mut ll = 0.0;
            let mut grad = Vec::with_capacity(y.len());
            let mut w = Vec::with_capacity(y.len());
            for (i, (yi, e)) in y.iter().zip(eta).enumerate() {
                let le = exposure.as_ref().map_or(0.0, |x| x[i].ln());
                let mu = (e + le).exp();
                ll += yi * (e + le) - mu - ln_gamma(yi + 1.0);
                grad.push(yi - mu);
                w.push(mu);
            }
            (ll, grad, w)
        }
    }
}

fn log_likelihood(lik: &Likelihood, y: &[f64], eta: &[f64], log_noise: Option<f64>) -> f64 {
    likelihood_terms(lik, y, eta, log_noise).0
}

/// Gaussian approximation of `π(x | y, θ)` at the conditional mode.
#[derive(Debug, Clone)]
pub struct LaplaceFit {
    pub theta: Vec<f64>,
    pub log_posterior: f64,
    pub log_likelihood: f64,
    pub mode: Vec<f64>,
    pub iterations: usize,
    pub jitter: f64,
    /// Precision `Q + Aᵀ W A` with mean at the mode.
    pub posterior: Gmrf,
}

fn posterior_precision(prior: &PrecisionModel, a: &SparseMatrix, w: &[f64], mean: Vec<f64>) -> Result<PrecisionModel> {
    let ata = a.transpose().mul_diag(Some(w), a)?;
    let q = prior.q.add_scaled(1.0, &ata, 1.0)?;
    PrecisionModel {
        q,
        mean: vec![0.0; prior.dim()],
        constraints: prior.constraints.clone(),
        label: "posterior".into(),
        rank_deficiency: prior.rank_deficiency,
    }
    .with_mean(mean)
}

/// Laplace approximation at hyperparameters `theta`.
///
/// The conditional mode is found by damped Newton iteration (step halving
/// on the log posterior of `x`); all three Gaussian terms are then evaluated
/// at the mode.
pub fn laplace(model: &LatentModel, theta: &[f64]) -> Result<LaplaceFit> {
    let (log_noise, _) = model.unpack(theta)?;
    let prior = model.prior_precision(theta)?;
    let prior_gmrf = Gmrf::new(prior.clone())?;
    let a = model.projection()?;
    let y = &model.y;
    let objective = |x: &[f64]| log_likelihood(&model.likelihood, y, &a.matvec(x), log_noise) - 0.5 * prior.q.quad_form(x);

    let mut x = prior_gmrf.constrained_mean();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let eta = a.matvec(&x);
        let (_, g, w) = likelihood_terms(&model.likelihood, y, &eta, log_noise);
        let rhs_obs: Vec<f64> = g.iter().zip(&w).zip(&eta).map(|((g, w), e)| g + w * e).collect();
        let rhs = a.transpose_matvec(&rhs_obs);
        let post = posterior_precision(&prior, &a, &w, vec![0.0; x.len()])?;
        let post = Gmrf::new(post)?;
        let mut target = post.solve(&rhs)?;
        post.correct(&mut target);
        let step: Vec<f64> = target.iter().zip(&x).map(|(t, xi)| t - xi).collect();
        let f0 = objective(&x);
        let mut t = 1.0;
        let mut next: Vec<f64> = x.iter().zip(&step).map(|(xi, s)| xi + s).collect();
        while !(objective(&next) >= f0 - 1e-12 * f0.abs().max(1.0)) {
            t *= 0.5;
            if t < 1e-10 {
                return Err(Error::NewtonDivergence(iterations));
            }
            next = x.iter().zip(&step).map(|(xi, s)| xi + t * s).collect();
        }
        let change = step.iter().fold(0.0f64, |m, s| m.max((t * s).abs()));
        x = next;
        if change < NEWTON_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NewtonDivergence(iterations));
    }
    let eta = a.matvec(&x);
    let (ll, _, w) = likelihood_terms(&model.likelihood, y, &eta, log_noise);
    let posterior = Gmrf::new(posterior_precision(&prior, &a, &w, x.clone())?)?;
    let log_posterior = ll + prior_gmrf.log_density(&x)? - posterior.log_density(&x)? + model.log_prior_theta(theta)?;
    Ok(LaplaceFit { theta: theta.to_vec(), log_posterior, log_likelihood: ll, mode: x, iterations, jitter: posterior.factor().jitter(), posterior })
}

/// Unnormalized `log π(θ | y)` from the Laplace approximation.
pub fn log_posterior_theta(model: &LatentModel, theta: &[f64]) -> Result<f64> {
    Ok(laplace(model, theta)?.log_posterior)
}
