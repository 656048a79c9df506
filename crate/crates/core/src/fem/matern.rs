use super::special::bessel_k;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Matérn field described by practical range, marginal sd and smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub range: f64,
    pub sigma: f64,
    pub nu: f64,
}

/// Internal SPDE scales. `alpha` is the integer operator order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdeParams {
    pub log_kappa: f64,
    pub log_tau: f64,
    pub alpha: u32,
}

impl MaternParams {
    pub fn new(range: f64, sigma: f64, nu: f64) -> Result<Self> {
        let p = MaternParams { range, sigma, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("range", self.range), ("sigma", self.sigma), ("nu", self.nu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        kappa_from_range(self.range, self.nu)
    }

    /// SPDE parameters in two dimensions (α = ν + 1).
    pub fn to_spde(&self) -> Result<SpdeParams> {
        self.validate()?;
        let alpha = self.nu + 1.0;
        if alpha.fract() != 0.0 || !(2.0..=4.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("nu = {} does not give an integer alpha in 2..=4", self.nu)));
        }
        let kappa = self.kappa();
        Ok(SpdeParams { log_kappa: kappa.ln(), log_tau: log_tau_for_sigma(kappa, self.nu, self.sigma), alpha: alpha as u32 })
    }

    pub fn from_spde(p: &SpdeParams) -> Result<Self> {
        p.validate()?;
        if p.alpha < 2 {
            return Err(Error::InvalidParameter("alpha = 1 gives nu = 0, which has no Matérn equivalent in 2D".into()));
        }
        let nu = p.nu();
        let kappa = p.log_kappa.exp();
        let log_sigma = log_sigma_for_tau(kappa, nu, p.log_tau);
        Ok(MaternParams { range: (8.0 * nu).sqrt() / kappa, sigma: log_sigma.exp(), nu })
    }
}

impl SpdeParams {
    pub fn new(kappa: f64, tau: f64, alpha: u32) -> Result<Self> {
        let p = SpdeParams { log_kappa: kappa.ln(), log_tau: tau.ln(), alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha must be 1..=4, got {}", self.alpha)));
        }
        if !self.log_kappa.is_finite() || !self.log_tau.is_finite() {
            return Err(Error::InvalidParameter("kappa and tau must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.log_kappa.exp()
    }

    pub fn tau(&self) -> f64 {
        self.log_tau.exp()
    }

    /// Smoothness in two dimensions.
    pub fn nu(&self) -> f64 {
        self.alpha as f64 - 1.0
    }
}

pub fn kappa_from_range(range: f64, nu: f64) -> f64 {
    (8.0 * nu).sqrt() / range
}

/// `log τ` giving marginal sd `sigma` for the stationary planar field:
/// `τ² = Γ(ν) / (Γ(ν + 1) 4π κ^{2ν} σ²)`.
pub fn log_tau_for_sigma(kappa: f64, nu: f64, sigma: f64) -> f64 {
    0.5 * (ln_gamma(nu) - ln_gamma(nu + 1.0) - (4.0 * PI).ln() - 2.0 * nu * kappa.ln()) - sigma.ln()
}

pub fn log_sigma_for_tau(kappa: f64, nu: f64, log_tau: f64) -> f64 {
    0.5 * (ln_gamma(nu) - ln_gamma(nu + 1.0) - (4.0 * PI).ln() - 2.0 * nu * kappa.ln()) - log_tau
}

/// Matérn covariance at distance `d`.
pub fn matern_covariance(d: f64, p: &MaternParams) -> f64 {
    let s2 = p.sigma * p.sigma;
    if d <= 0.0 {
        return s2;
    }
    s2 * matern_correlation(d, p.range, p.nu)
}

pub fn matern_correlation(d: f64, range: f64, nu: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let x = kappa_from_range(range, nu) * d;
    if x > 700.0 {
        return 0.0;
    }
    // 2^{1-ν}/Γ(ν) x^ν K_ν(x), in logs to avoid overflow for large ν.
    let log_c = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * x.ln();
    (log_c + bessel_k(nu, x).ln()).exp()
}
