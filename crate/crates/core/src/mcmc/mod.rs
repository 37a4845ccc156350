//! Metropolis-within-Gibbs sampler for the quantile VAR under constant,
//! stochastic-volatility and GARCH(1,1) scale dynamics.

mod common;
mod config;
mod constant;
mod draws;
mod driver;
mod garch;
mod likelihood;
mod state;
mod sv;

pub use common::{
    a_row_conditional, beta_conditional, residuals, sample_a_rows, sample_beta_gaussian, sample_w_gig, w_gig_params,
    GaussianConditional, GIG_EPSILON,
};
pub use config::{Block, ConstPrior, FixedBlocks, GarchInit, McmcConfig, ModelSpec, Priors, Regime, SvPrior};
pub use constant::{inv_gamma_logpdf, sample_delta2};
pub use draws::{quantile_sorted, BlockAcceptance, Draw, PosteriorDraws, TerminalVol};
pub use driver::{initialize, run_chain, run_chain_from};
pub use garch::{
    garch_next_variance, garch_paths, garch_recursion, initial_variance, sample_beta_garch, sample_garch_statics,
    sample_w_garch,
};
pub use likelihood::{
    direct_loglik_t, loglik, loglik_t, per_series_loglik_t, transformed_response, SeriesPartials, Transform,
};
pub use state::{AdaptState, McmcState, VolState};
pub use sv::{
    ar1_logprior, sample_h_path, sample_h_paths_parallel, sample_phi, sample_sigma2_h, sigma2_h_posterior,
    sv_transformed_response,
};

use crate::domain::{RegressionDesign, ThetaParams};

/// The fixed ingredients of a fit: data, quantile parametrization and priors.
#[derive(Debug, Clone)]
pub struct Model<'a> {
    pub design: &'a RegressionDesign,
    pub theta: ThetaParams,
    pub priors: &'a Priors,
}

impl<'a> Model<'a> {
    pub fn new(design: &'a RegressionDesign, levels: &crate::domain::QuantileLevels, priors: &'a Priors) -> Self {
        Self { design, theta: crate::domain::theta_params(levels), priors }
    }
}
