//! Closed-form quantities used to validate the simulations: the diluted
//! average effect under zero inflation, the asymptotic power curve of the
//! prefix-KS average test, and the moment-matching constants behind
//! Brown's combination.

use crate::error::{Error, Result};
use crate::kernel::{normal_cdf, normal_quantile};

/// Parameters of the asymptotic power model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    /// Baseline average effect with no zero inflation.
    pub delta0: f64,
    /// Treatment effect at the biomarker spike, D(0).
    pub d_at_zero: f64,
    /// First-order standard deviation of the effect estimator.
    pub sigma: f64,
    /// Total sample size.
    pub n: usize,
    /// Two-sided level.
    pub alpha: f64,
}

impl TheoryParams {
    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if self.n == 0 {
            return Err(Error::Domain("n must be >= 1".into()));
        }
        Ok(())
    }
}

/// Average treatment effect under zero-inflation rate `pi0`:
/// Delta(pi0) = Delta0 - pi0 * (Delta0 - D(0)). Affine and strictly
/// decreasing in pi0 whenever D(0) < Delta0.
pub fn average_effect(params: &TheoryParams, pi0: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&pi0) {
        return Err(Error::Domain(format!("pi0 must be in [0,1), got {pi0}")));
    }
    Ok(params.delta0 - pi0 * (params.delta0 - params.d_at_zero))
}

/// Noncentrality parameter lambda(pi0) = sqrt(N) * Delta(pi0) / sigma.
pub fn noncentrality(params: &TheoryParams, pi0: f64) -> Result<f64> {
    params.validate()?;
    Ok((params.n as f64).sqrt() * average_effect(params, pi0)? / params.sigma)
}

/// Asymptotic two-sided power 1 - Phi(z - lambda) + Phi(-z - lambda) with
/// z the 1 - alpha/2 normal quantile. Equals alpha exactly at lambda = 0.
pub fn aksa_asymptotic_power(params: &TheoryParams, pi0: f64) -> Result<f64> {
    params.validate()?;
    let lambda = noncentrality(params, pi0)?;
    power_at_noncentrality(lambda, params.alpha)
}

/// Power of the two-sided normal test at drift `lambda`.
pub fn power_at_noncentrality(lambda: f64, alpha: f64) -> Result<f64> {
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    Ok(1.0 - normal_cdf(z - lambda) + normal_cdf(-z - lambda))
}

/// Brown moment-matching constants for correlation `rho`: returns
/// (c, nu, mu_s, var_s) with c = 1 + rho, nu = 4/c, mu_s = 4 and
/// var_s = 8(1 + rho), satisfying c*nu = mu_s and 2*c^2*nu = var_s.
pub fn brown_moment_match(rho: f64) -> Result<(f64, f64, f64, f64)> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho must be in [0,1], got {rho}")));
    }
    let c = 1.0 + rho;
    let nu = 4.0 / c;
    Ok((c, nu, 4.0, 8.0 * (1.0 + rho)))
}
