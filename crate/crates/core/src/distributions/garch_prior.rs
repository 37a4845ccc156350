use rand::Rng;

use super::std_normal;
use crate::error::{Error, Result};

/// Maximum number of proposals before the truncated prior sampler gives up.
pub const REJECTION_CAP: usize = 100_000;

/// GARCH(1,1) parameters of one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchStatics {
    pub omega: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl GarchStatics {
    pub fn is_valid(&self) -> bool {
        self.omega > 0.0 && self.alpha >= 0.0 && self.gamma >= 0.0 && self.alpha + self.gamma < 1.0
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.gamma)
    }
}

/// log ω ~ N(μ_ω, σ²_ω); (log α, log γ) ~ N(μ, Σ) restricted to α + γ < 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchPrior {
    pub mu_omega: f64,
    pub var_omega: f64,
    pub mu_alpha: f64,
    pub var_alpha: f64,
    pub mu_gamma: f64,
    pub var_gamma: f64,
    /// Correlation between log α and log γ.
    pub corr_alpha_gamma: f64,
}

impl Default for GarchPrior {
    fn default() -> Self {
        Self {
            mu_omega: 0.1f64.ln(),
            var_omega: 4.0,
            mu_alpha: 0.1f64.ln(),
            var_alpha: 1.0,
            mu_gamma: 0.8f64.ln(),
            var_gamma: 0.25,
            corr_alpha_gamma: 0.0,
        }
    }
}

impl GarchPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.var_omega, self.var_alpha, self.var_gamma].iter().all(|v| *v > 0.0 && v.is_finite())
            && [self.mu_omega, self.mu_alpha, self.mu_gamma].iter().all(|v| v.is_finite())
            && self.corr_alpha_gamma.abs() < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("GARCH prior variances must be positive, |corr| < 1".into()))
        }
    }

    /// Unnormalized log prior density with respect to Lebesgue measure on (ω, α, γ).
    pub fn log_density(&self, s: &GarchStatics) -> f64 {
        if !(s.omega > 0.0 && s.alpha > 0.0 && s.gamma > 0.0 && s.alpha + s.gamma < 1.0) {
            return f64::NEG_INFINITY;
        }
        let (lo, la, lg) = (s.omega.ln(), s.alpha.ln(), s.gamma.ln());
        let zo = (lo - self.mu_omega).powi(2) / self.var_omega;
        let da = (la - self.mu_alpha) / self.var_alpha.sqrt();
        let dg = (lg - self.mu_gamma) / self.var_gamma.sqrt();
        let r = self.corr_alpha_gamma;
        let q = (da * da - 2.0 * r * da * dg + dg * dg) / (1.0 - r * r);
        -0.5 * (zo + q) - lo - la - lg
    }

    /// A draw together with the number of proposals it took.
    pub fn sample_with_attempts<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(GarchStatics, usize)> {
        self.validate()?;
        let omega = (self.mu_omega + self.var_omega.sqrt() * std_normal(rng)).exp();
        let r = self.corr_alpha_gamma;
        for attempt in 1..=REJECTION_CAP {
            let z1 = std_normal(rng);
            let z2 = r * z1 + (1.0 - r * r).sqrt() * std_normal(rng);
            let alpha = (self.mu_alpha + self.var_alpha.sqrt() * z1).exp();
            let gamma = (self.mu_gamma + self.var_gamma.sqrt() * z2).exp();
            if alpha + gamma < 1.0 {
                return Ok((GarchStatics { omega, alpha, gamma }, attempt));
            }
        }
        Err(Error::RejectionCap {
            cap: REJECTION_CAP,
            context: "truncated GARCH prior (α + γ < 1 has negligible prior mass)".into(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GarchStatics> {
        self.sample_with_attempts(rng).map(|(s, _)| s)
    }
}

/// One draw from the truncated log-Gaussian GARCH prior.
pub fn truncated_garch_prior_sample<R: Rng + ?Sized>(prior: &GarchPrior, rng: &mut R) -> Result<GarchStatics> {
    prior.sample(rng)
}
