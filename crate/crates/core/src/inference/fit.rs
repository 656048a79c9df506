use super::laplace::{laplace, LaplaceFit};
use super::model::{LatentBlock, LatentModel, FIXED_EFFECT_PRECISION};
use crate::error::{Error, Result};
use crate::par;
use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Eb,
    Grid,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eb" => Ok(Strategy::Eb),
            "grid" => Ok(Strategy::Grid),
            _ => Err(Error::InvalidParameter(format!("unknown strategy '{s}' (expected eb or grid)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Step in units of the posterior sd of each hyperparameter.
    pub step_sd: f64,
    /// Points whose log posterior is this far below the mode are dropped.
    pub log_drop: f64,
    /// Largest |step index| explored along any axis.
    pub max_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { step_sd: 0.5, log_drop: 2.5, max_steps: 12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub max_iters: u64,
    pub sd_tolerance: f64,
    pub initial_step: f64,
    pub polish_steps: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig { max_iters: 4000, sd_tolerance: 1e-10, initial_step: 1.0, polish_steps: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint {
    pub theta: Vec<f64>,
    pub log_posterior: f64,
    pub weight: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub evaluations: usize,
    pub optimizer_iterations: u64,
    pub max_newton_iterations: usize,
    pub max_jitter: f64,
    pub fixed_effect_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub strategy: Strategy,
    pub grid: Option<GridConfig>,
    pub theta_names: Vec<String>,
    pub theta_mode: Vec<f64>,
    pub theta_sd: Vec<f64>,
    pub points: Vec<ThetaPoint>,
    pub blocks: Vec<LatentBlock>,
    pub latent_mean: Vec<f64>,
    pub latent_sd: Vec<f64>,
    pub diagnostics: Diagnostics,
}

struct Objective<'a> {
    model: &'a LatentModel,
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(match laplace(self.model, theta) {
            Ok(f) if f.log_posterior.is_finite() => -f.log_posterior,
            _ => f64::INFINITY,
        })
    }
}

fn eval(model: &LatentModel, theta: &[f64]) -> f64 {
    laplace(model, theta).map_or(f64::NEG_INFINITY, |f| f.log_posterior)
}

/// Central-difference gradient and Hessian of the log posterior.
fn derivatives(model: &LatentModel, theta: &[f64], h: f64) -> (DVector<f64>, DMatrix<f64>) {
    let d = theta.len();
    let f0 = eval(model, theta);
    let shifted = |moves: &[(usize, f64)]| {
        let mut t = theta.to_vec();
        for &(i, s) in moves {
            t[i] += s;
        }
        t
    };
    let mut jobs: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        jobs.push(shifted(&[(i, h)]));
        jobs.push(shifted(&[(i, -h)]));
        for j in 0..i {
            for (si, sj) in [(h, h), (h, -h), (-h, h), (-h, -h)] {
                jobs.push(shifted(&[(i, si), (j, sj)]));
            }
        }
    }
    let vals = par::map_slice(&jobs, |t| eval(model, t));
    let mut g = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        let (fp, fm) = (vals[k], vals[k + 1]);
        k += 2;
        g[i] = (fp - fm) / (2.0 * h);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let v = (vals[k] - vals[k + 1] - vals[k + 2] + vals[k + 3]) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
            k += 4;
        }
    }
    (g, hess)
}

struct Mode {
    theta: Vec<f64>,
    sd: Vec<f64>,
    iterations: u64,
    evaluations: usize,
}

fn find_mode(model: &LatentModel, cfg: &OptimConfig) -> Result<Mode> {
    let d = model.n_theta();
    let start = model.initial_theta();
    if d == 0 {
        return Ok(Mode { theta: start, sd: vec![], iterations: 0, evaluations: 0 });
    }
    let mut simplex = vec![start.clone()];
    for i in 0..d {
        let mut p = start.clone();
        p[i] += cfg.initial_step;
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(cfg.sd_tolerance).map_err(|e| Error::OptimizerFailure(e.to_string()))?;
    let res = Executor::new(Objective { model }, solver).configure(|s| s.max_iters(cfg.max_iters)).run().map_err(|e| Error::OptimizerFailure(e.to_string()))?;
    let state = res.state();
    let mut theta = state.get_best_param().cloned().ok_or_else(|| Error::OptimizerFailure("no parameter".into()))?;
    let iterations = state.get_iter();
    let mut evaluations = state.get_func_counts().get("cost_count").copied().unwrap_or(0) as usize;
    let mut best = eval(model, &theta);
    if !best.is_finite() {
        return Err(Error::OptimizerFailure("log posterior is not finite at the optimum".into()));
    }
    let h = 1e-3;
    let (mut _g, mut hess) = derivatives(model, &theta, h);
    evaluations += 2 * d * d + 1;
    for _ in 0..cfg.polish_steps {
        let Some(chol) = (-hess.clone()).cholesky() else { break };
        let step = chol.solve(&_g);
        if step.amax() < 1e-7 {
            break;
        }
        let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
        let v = eval(model, &cand);
        evaluations += 1;
        if !(v > best) {
            break;
        }
        theta = cand;
        best = v;
        (_g, hess) = derivatives(model, &theta, h);
        evaluations += 2 * d * d + 1;
    }
    let sd = match (-hess.clone()).cholesky() {
        Some(c) => c.inverse().diagonal().iter().map(|v| v.sqrt()).collect(),
        None => hess.diagonal().iter().map(|&v| if v < 0.0 { (-1.0 / v).sqrt() } else { 1.0 }).collect(),
    };
    Ok(Mode { theta, sd, iterations, evaluations })
}

fn normalize(points: &mut [ThetaPoint]) {
    let max = points.iter().map(|p| p.log_posterior).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = points.iter().map(|p| (p.log_posterior - max).exp()).sum();
    for p in points.iter_mut() {
        p.weight = (p.log_posterior - max).exp() / total;
    }
}

/// Breadth-first exploration of the integer lattice around the mode.
fn explore(model: &LatentModel, mode: &Mode, center: &LaplaceFit, cfg: &GridConfig) -> Result<Vec<LaplaceFit>> {
    let d = mode.theta.len();
    let side = 2.0 * cfg.max_steps as f64 + 1.0;
    if cfg.log_drop.is_infinite() && side.powi(d as i32) > MAX_GRID_POINTS as f64 {
        return Err(Error::GridExplosion(MAX_GRID_POINTS));
    }
    let steps: Vec<f64> = mode.sd.iter().map(|s| cfg.step_sd * s).collect();
    let at = |k: &[i64]| -> Vec<f64> { (0..d).map(|i| mode.theta[i] + k[i] as f64 * steps[i]).collect() };
    let max_lp = center.log_posterior;
    let mut accepted: BTreeMap<Vec<i64>, LaplaceFit> = BTreeMap::new();
    let mut seen: BTreeSet<Vec<i64>> = BTreeSet::new();
    let origin = vec![0i64; d];
    seen.insert(origin.clone());
    accepted.insert(origin.clone(), center.clone());
    let mut frontier: VecDeque<Vec<i64>> = VecDeque::from([origin]);
    while !frontier.is_empty() {
        let mut layer: Vec<Vec<i64>> = Vec::new();
        for k in frontier.drain(..) {
            for i in 0..d {
                for s in [-1i64, 1] {
                    let mut n = k.clone();
                    n[i] += s;
                    if n[i].unsigned_abs() as usize <= cfg.max_steps && seen.insert(n.clone()) {
                        layer.push(n);
                    }
                }
            }
        }
        if seen.len() > MAX_GRID_POINTS {
            return Err(Error::GridExplosion(MAX_GRID_POINTS));
        }
        let fits = par::map_slice(&layer, |k| laplace(model, &at(k)));
        for (k, f) in layer.into_iter().zip(fits) {
            if let Ok(f) = f {
                if f.log_posterior.is_finite() && f.log_posterior >= max_lp - cfg.log_drop {
                    accepted.insert(k.clone(), f);
                    frontier.push_back(k);
                }
            }
        }
    }
    Ok(accepted.into_values().collect())
}

/// Fit hyperparameters and latent marginals.
pub fn fit(model: &LatentModel, strategy: Strategy, grid: Option<GridConfig>, optim: Option<OptimConfig>) -> Result<FitResult> {
    model.validate()?;
    let mode = find_mode(model, &optim.unwrap_or_default())?;
    let center = laplace(model, &mode.theta)?;
    let grid_cfg = grid.unwrap_or_default();
    let fits = match strategy {
        Strategy::Eb => vec![center],
        Strategy::Grid => explore(model, &mode, &center, &grid_cfg)?,
    };
    let mut points: Vec<ThetaPoint> =
        fits.iter().map(|f| ThetaPoint { theta: f.theta.clone(), log_posterior: f.log_posterior, weight: 0.0, newton_iterations: f.iterations }).collect();
    normalize(&mut points);
    let n = model.latent_dim();
    let variances = par::map_slice(&fits, |f| f.posterior.marginal_variances());
    let mut mean = vec![0.0; n];
    let mut second = vec![0.0; n];
    for ((f, v), p) in fits.iter().zip(&variances).zip(&points) {
        for i in 0..n {
            mean[i] += p.weight * f.mode[i];
            second[i] += p.weight * (v[i].max(0.0) + f.mode[i] * f.mode[i]);
        }
    }
    let sd = mean.iter().zip(&second).map(|(m, s)| (s - m * m).max(0.0).sqrt()).collect();
    Ok(FitResult {
        strategy,
        grid: (strategy == Strategy::Grid).then_some(grid_cfg),
        theta_names: model.theta_names(),
        theta_mode: mode.theta,
        theta_sd: mode.sd,
        diagnostics: Diagnostics {
            evaluations: mode.evaluations + fits.len(),
            optimizer_iterations: mode.iterations,
            max_newton_iterations: fits.iter().map(|f| f.iterations).max().unwrap_or(0),
            max_jitter: fits.iter().map(|f| f.jitter).fold(0.0, f64::max),
            fixed_effect_precision: FIXED_EFFECT_PRECISION,
        },
        points,
        blocks: model.blocks(),
        latent_mean: mean,
        latent_sd: sd,
    })
}

impl FitResult {
    /// Posterior mean and sd of a named latent block.
    pub fn block(&self, name: &str) -> Option<(&[f64], &[f64])> {
        let b = self.blocks.iter().find(|b| b.name == name)?;
        Some((&self.latent_mean[b.offset..b.offset + b.len], &self.latent_sd[b.offset..b.offset + b.len]))
    }
}
