//! Constant-volatility benchmark: H_t ≡ diag(δ²) with δ² updated by log-normal random-walk MH.

use rand::Rng;

use super::config::ConstPrior;
use super::likelihood::{SeriesPartials, Transform};
use super::state::{McmcState, VolState};
use super::Model;
use crate::adapt::{rwmh_lognormal_step, ProposalCov};
use crate::error::Result;

/// Unnormalized inverse-gamma log density.
pub fn inv_gamma_logpdf(x: f64, prior: &ConstPrior) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    -(prior.shape + 1.0) * x.ln() - prior.rate / x
}

/// One MH update of δ²_j; returns acceptance.
pub fn sample_delta2<R: Rng + ?Sized>(model: &Model, state: &mut McmcState, ybar: &[Vec<f64>], j: usize, rng: &mut R) -> Result<bool> {
    let tr = Transform::new(&state.a_bar, &model.theta);
    let s = state.std_devs();
    let partials = SeriesPartials::new(&tr, ybar, &state.w, &s, j);
    let prior = &model.priors.constant;
    let target = |x: &[f64]| {
        let v = inv_gamma_logpdf(x[0], prior) + partials.loglik_const(x[0].sqrt());
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let cur = match &state.vol {
        VolState::Const { delta2 } => delta2[j],
        _ => panic!("constant-volatility block called on a different regime"),
    };
    let current = target(&[cur]);
    let mut scale = state.adapt.vol[j];
    let base = state.adapt.vol_base[j];
    let out = rwmh_lognormal_step(&[cur], current, target, &ProposalCov::Diagonal(vec![base]), &scale, rng)?;
    scale.update(out.accepted);
    state.adapt.vol[j] = scale;
    if let VolState::Const { delta2 } = &mut state.vol {
        delta2[j] = out.state[0];
    }
    Ok(out.accepted)
}
