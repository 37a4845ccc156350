//! Adaptive random-walk Metropolis–Hastings.
//!
//! The proposal covariance is κ·S with S fixed and κ tuned by a Robbins–Monro
//! recursion on log κ toward a target acceptance rate.

use nalgebra::DMatrix;
use rand::Rng;

use crate::distributions::{open_uniform, std_normal};
use crate::error::{Error, Result};

pub const KAPPA_MIN: f64 = 1e-6;
pub const KAPPA_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveScale {
    pub kappa: f64,
    pub target_rate: f64,
    pub iteration: u64,
    pub decay_exponent: f64,
    pub frozen: bool,
}

impl AdaptiveScale {
    pub fn new(kappa: f64, target_rate: f64) -> Self {
        Self { kappa: kappa.clamp(KAPPA_MIN, KAPPA_MAX), target_rate, iteration: 0, decay_exponent: 0.6, frozen: false }
    }

    /// One Robbins–Monro step: log κ += m^{−c}(𝟙[accepted] − target).
    pub fn update(&mut self, accepted: bool) {
        if self.frozen {
            return;
        }
        self.iteration += 1;
        let gain = (self.iteration as f64).powf(-self.decay_exponent);
        let hit = if accepted { 1.0 } else { 0.0 };
        self.kappa = (self.kappa.ln() + gain * (hit - self.target_rate)).exp().clamp(KAPPA_MIN, KAPPA_MAX);
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }
}

/// Functional form of [`AdaptiveScale::update`].
pub fn adapt(scale: AdaptiveScale, accepted: bool) -> AdaptiveScale {
    let mut s = scale;
    s.update(accepted);
    s
}

/// The fixed part S of the proposal covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum ProposalCov {
    /// Diagonal entries of S.
    Diagonal(Vec<f64>),
    /// Lower Cholesky factor of S.
    Cholesky(DMatrix<f64>),
    /// Lower Cholesky factor L of the precision S⁻¹ = L·Lᵀ.
    PrecisionCholesky(DMatrix<f64>),
}

impl ProposalCov {
    pub fn identity(dim: usize) -> Self {
        ProposalCov::Diagonal(vec![1.0; dim])
    }

    pub fn from_covariance(s: DMatrix<f64>) -> Result<Self> {
        let cond = condition_estimate(&s);
        nalgebra::Cholesky::new(s).map(|c| ProposalCov::Cholesky(c.l())).ok_or(Error::NotPositiveDefinite { condition: cond })
    }

    pub fn dim(&self) -> usize {
        match self {
            ProposalCov::Diagonal(d) => d.len(),
            ProposalCov::Cholesky(l) | ProposalCov::PrecisionCholesky(l) => l.nrows(),
        }
    }

    /// A draw from N(0, κ·S).
    pub fn draw<R: Rng + ?Sized>(&self, kappa: f64, rng: &mut R) -> Vec<f64> {
        let sk = kappa.sqrt();
        match self {
            ProposalCov::Diagonal(d) => d.iter().map(|v| sk * v.sqrt() * std_normal(rng)).collect(),
            ProposalCov::Cholesky(l) => {
                let n = l.nrows();
                let z: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
                (0..n).map(|i| sk * (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>()).collect()
            }
            ProposalCov::PrecisionCholesky(l) => {
                let n = l.nrows();
                let z = nalgebra::DVector::from_iterator(n, (0..n).map(|_| std_normal(rng)));
                let v = l.tr_solve_lower_triangular(&z).expect("precision factor is non-singular");
                v.iter().map(|x| sk * x).collect()
            }
        }
    }
}

/// Ratio of extreme eigenvalues of a symmetric matrix (∞ when not positive).
pub fn condition_estimate(s: &DMatrix<f64>) -> f64 {
    let sym = (s + s.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub accepted: bool,
    pub log_target: f64,
}

fn check_current(current_lp: f64) -> Result<()> {
    if current_lp.is_nan() {
        return Err(Error::InvalidParameter("log target is NaN at the current state".into()));
    }
    Ok(())
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    // NaN proposals are rejected.
    log_ratio >= 0.0 || open_uniform(rng).ln() < log_ratio
}

/// Gaussian random-walk MH step; `current_lp` is the cached target at `current`.
/// The adaptive scale is not updated here.
pub fn rwmh_step<F, R>(
    current: &[f64],
    current_lp: f64,
    mut log_target: F,
    proposal: &ProposalCov,
    scale: &AdaptiveScale,
    rng: &mut R,
) -> Result<StepOutcome>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    check_current(current_lp)?;
    if proposal.dim() != current.len() {
        return Err(Error::Dimension(format!("proposal dim {} vs state {}", proposal.dim(), current.len())));
    }
    let step = proposal.draw(scale.kappa, rng);
    let cand: Vec<f64> = current.iter().zip(&step).map(|(x, d)| x + d).collect();
    let lp = log_target(&cand);
    if accept(lp - current_lp, rng) {
        Ok(StepOutcome { state: cand, accepted: true, log_target: lp })
    } else {
        Ok(StepOutcome { state: current.to_vec(), accepted: false, log_target: current_lp })
    }
}

/// Random walk on log coordinates for a positive vector. `log_target` is the
/// density in the natural coordinates; the Jacobian Π x*/Π x enters the ratio.
pub fn rwmh_lognormal_step<F, R>(
    current: &[f64],
    current_lp: f64,
    mut log_target: F,
    proposal: &ProposalCov,
    scale: &AdaptiveScale,
    rng: &mut R,
) -> Result<StepOutcome>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    check_current(current_lp)?;
    if current.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::InvalidParameter("log-normal random walk needs a positive state".into()));
    }
    if proposal.dim() != current.len() {
        return Err(Error::Dimension(format!("proposal dim {} vs state {}", proposal.dim(), current.len())));
    }
    let step = proposal.draw(scale.kappa, rng);
    let cand: Vec<f64> = current.iter().zip(&step).map(|(x, d)| x * d.exp()).collect();
    let lp = log_target(&cand);
    let jacobian: f64 = step.iter().sum();
    if accept(lp - current_lp + jacobian, rng) {
        Ok(StepOutcome { state: cand, accepted: true, log_target: lp })
    } else {
        Ok(StepOutcome { state: current.to_vec(), accepted: false, log_target: current_lp })
    }
}
