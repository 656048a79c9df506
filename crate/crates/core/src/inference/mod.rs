//! Laplace-approximation inference for latent Gaussian models.
//!
//! For hyperparameters θ the conditional mode of the latent field is found
//! by damped Newton iteration and
//! `log π(θ | y) ≈ log π(y | x*, θ) + log π(x* | θ) − log π_G(x* | y, θ) + log π(θ)`
//! with `π_G` the Gaussian approximation at the mode. θ is then either
//! fixed at its maximizer (`eb`) or integrated over an axis-aligned grid.

mod fit;
mod laplace;
mod model;
mod predict;

pub use fit::{fit, Diagnostics, FitResult, GridConfig, OptimConfig, Strategy, ThetaPoint, MAX_GRID_POINTS};
pub use laplace::{laplace, log_posterior_theta, LaplaceFit, NEWTON_MAX_ITER, NEWTON_TOL};
pub use model::{Component, ComponentKind, FixedEffects, LatentBlock, LatentModel, Likelihood, FIXED_EFFECT_PRECISION, MAX_THETA};
pub use predict::{predict, quantile_sorted, Prediction, Summary, QUANTILE_LEVELS};
