//! Penalised-complexity priors.
//!
//! * precision `τ`: the standard deviation `1/√τ` is exponential with rate
//!   `λ = −ln(α)/U`, so that `P(1/√τ > U) = α`;
//! * Matérn range and marginal sd in two dimensions:
//!   `π(r, σ) = λ_r r⁻² exp(−λ_r / r) · λ_s exp(−λ_s σ)` with
//!   `λ_r = −ln(α_r) r₀` and `λ_s = −ln(α_s) / σ₀`, so that
//!   `P(r < r₀) = α_r` and `P(σ > σ₀) = α_s`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {p}")))
    }
}

fn check_pos(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcPrecisionPrior {
    pub u: f64,
    pub alpha: f64,
}

impl PcPrecisionPrior {
    pub fn new(u: f64, alpha: f64) -> Result<Self> {
        let p = PcPrecisionPrior { u, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_pos("U", self.u)?;
        check_prob("alpha", self.alpha)
    }

    pub fn lambda(&self) -> f64 {
        -self.alpha.ln() / self.u
    }

    /// Tail probability `P(1/√τ > u)` implied by rate `lambda`.
    pub fn alpha_for(lambda: f64, u: f64) -> f64 {
        (-lambda * u).exp()
    }

    /// Log density with respect to `log τ`.
    pub fn log_density_log_tau(&self, log_tau: f64) -> Result<f64> {
        Ok(pc_precision_logdensity(log_tau.exp(), self)? + log_tau)
    }
}

/// `log π(τ) = log(λ/2) − (3/2) log τ − λ τ^{-1/2}`.
pub fn pc_precision_logdensity(tau: f64, prior: &PcPrecisionPrior) -> Result<f64> {
    prior.validate()?;
    if !(tau > 0.0) || tau.is_infinite() {
        return Err(Error::NonPositivePrecision(tau));
    }
    let lambda = prior.lambda();
    Ok((lambda / 2.0).ln() - 1.5 * tau.ln() - lambda / tau.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcRangeSigmaPrior {
    pub r0: f64,
    pub alpha_r: f64,
    pub sigma0: f64,
    pub alpha_s: f64,
}

impl PcRangeSigmaPrior {
    pub fn new(r0: f64, alpha_r: f64, sigma0: f64, alpha_s: f64) -> Result<Self> {
        let p = PcRangeSigmaPrior { r0, alpha_r, sigma0, alpha_s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_pos("r0", self.r0)?;
        check_pos("sigma0", self.sigma0)?;
        check_prob("alpha_r", self.alpha_r)?;
        check_prob("alpha_s", self.alpha_s)
    }

    pub fn lambda_r(&self) -> f64 {
        -self.alpha_r.ln() * self.r0
    }

    pub fn lambda_s(&self) -> f64 {
        -self.alpha_s.ln() / self.sigma0
    }

    /// Log density with respect to `(log r, log σ)`.
    pub fn log_density_log_scale(&self, log_r: f64, log_sigma: f64) -> Result<f64> {
        Ok(pc_range_sigma_logdensity(log_r.exp(), log_sigma.exp(), self)? + log_r + log_sigma)
    }
}

pub fn pc_range_sigma_logdensity(r: f64, sigma: f64, prior: &PcRangeSigmaPrior) -> Result<f64> {
    prior.validate()?;
    for v in [r, sigma] {
        if !(v > 0.0) || v.is_infinite() {
            return Err(Error::NonPositiveArgument(v));
        }
    }
    let (lr, ls) = (prior.lambda_r(), prior.lambda_s());
    Ok(lr.ln() - 2.0 * r.ln() - lr / r + ls.ln() - ls * sigma)
}

/// Placeholder prior for the BYM2 mixing weight: uniform on `[0, 1]`. A
/// penalised-complexity prior for it has no closed form.
pub fn bym2_weight_logdensity_uniform(w: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&w) {
        Ok(0.0)
    } else {
        Err(Error::WeightOutOfRange(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibrated_rate() {
        let p = PcPrecisionPrior::new(1.16, 0.01).unwrap();
        // −ln(0.01) / 1.16 = 3.969974...
        assert!((p.lambda() - 3.969974298265596).abs() < 1e-12);
        assert!((p.lambda() - 3.970).abs() < 1e-4);
        assert!((PcPrecisionPrior::alpha_for(p.lambda(), 1.16) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = PcPrecisionPrior::new(1.0, 0.05).unwrap();
        assert!(matches!(pc_precision_logdensity(0.0, &p), Err(Error::NonPositivePrecision(_))));
        assert!(PcPrecisionPrior::new(1.0, 1.0).is_err());
        let q = PcRangeSigmaPrior::new(1.0, 0.05, 1.0, 0.05).unwrap();
        assert!(matches!(pc_range_sigma_logdensity(-1.0, 1.0, &q), Err(Error::NonPositiveArgument(_))));
        assert!(bym2_weight_logdensity_uniform(1.2).is_err());
        assert_eq!(bym2_weight_logdensity_uniform(0.3).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_value() {
        // U = ln 2 / 2, α = 1/2 gives λ = 2.
        let p = PcPrecisionPrior::new(std::f64::consts::LN_2 / 2.0, 0.5).unwrap();
        assert!((p.lambda() - 2.0).abs() < 1e-15);
        assert!((pc_precision_logdensity(4.0, &p).unwrap() - (-1.5 * 4f64.ln() - 1.0)).abs() < 1e-14);
    }
}
