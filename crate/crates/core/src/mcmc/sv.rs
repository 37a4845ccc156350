//! Stochastic-volatility blocks: whole-path h updates, persistence φ and innovation variance σ²_h.

use rand::Rng;

use super::config::SvPrior;
use super::likelihood::{SeriesPartials, Transform};
use super::state::{McmcState, VolState};
use super::Model;
use crate::adapt::{rwmh_step, AdaptiveScale, ProposalCov};
use crate::distributions::{inv_gamma, LN_2PI};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, rng_from_seed, Execution};

/// Log density of a mean-zero stationary AR(1) path, including the initial term.
pub fn ar1_logprior(h: &[f64], phi: f64, sigma2: f64) -> f64 {
    if !(phi.abs() < 1.0) || !(sigma2 > 0.0) {
        return f64::NEG_INFINITY;
    }
    let v0 = sigma2 / (1.0 - phi * phi);
    let mut lp = -0.5 * (LN_2PI + v0.ln() + h[0] * h[0] / v0);
    let ls = sigma2.ln();
    for t in 1..h.len() {
        let e = h[t] - phi * h[t - 1];
        lp -= 0.5 * (LN_2PI + ls + e * e / sigma2);
    }
    lp
}

fn sv_parts(state: &McmcState) -> (&Vec<Vec<f64>>, &Vec<f64>, &Vec<f64>) {
    match &state.vol {
        VolState::Sv { h, phi, sigma2_h } => (h, phi, sigma2_h),
        _ => panic!("stochastic-volatility block called on a different regime"),
    }
}

/// Transformed response ỹʲ_t for the current state (β already removed from y).
pub fn sv_transformed_response(model: &Model, state: &McmcState, ybar_t: &[f64], j: usize, t: usize) -> Vec<f64> {
    let tr = Transform::new(&state.a_bar, &model.theta);
    let s: Vec<f64> = (0..state.n()).map(|i| state.vol.variance(i, t).sqrt()).collect();
    super::likelihood::transformed_response(&tr, ybar_t, state.w[t], &s, j)
}

fn h_step<R: Rng + ?Sized>(
    partials: &SeriesPartials,
    h: &[f64],
    phi: f64,
    sigma2: f64,
    base_var: f64,
    scale: &mut AdaptiveScale,
    rng: &mut R,
) -> Result<(Vec<f64>, bool)> {
    let target = |x: &[f64]| {
        let s: Vec<f64> = x.iter().map(|v| (0.5 * v).exp()).collect();
        let v = partials.loglik(&s) + ar1_logprior(x, phi, sigma2);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let current = target(h);
    let prop = ProposalCov::Diagonal(vec![base_var; h.len()]);
    let out = rwmh_step(h, current, target, &prop, scale, rng)?;
    scale.update(out.accepted);
    Ok((out.state, out.accepted))
}

/// Whole-path random-walk update of h_j; returns whether the proposal was accepted.
pub fn sample_h_path<R: Rng + ?Sized>(
    model: &Model,
    state: &mut McmcState,
    ybar: &[Vec<f64>],
    j: usize,
    rng: &mut R,
) -> Result<bool> {
    let tr = Transform::new(&state.a_bar, &model.theta);
    let s = state.std_devs();
    let partials = SeriesPartials::new(&tr, ybar, &state.w, &s, j);
    let (h, phi, sigma2) = {
        let (h, phi, sigma2) = sv_parts(state);
        (h[j].clone(), phi[j], sigma2[j])
    };
    let base = state.adapt.vol_base[j];
    let mut scale = state.adapt.vol[j];
    let (new_h, accepted) = h_step(&partials, &h, phi, sigma2, base, &mut scale, rng)?;
    state.adapt.vol[j] = scale;
    if let VolState::Sv { h, .. } = &mut state.vol {
        h[j] = new_h;
    }
    Ok(accepted)
}

/// Updates all h-paths concurrently, each series conditioning on the other
/// series' paths from before this sweep. Approximate: the joint update is not
/// a Gibbs step of the exact posterior.
pub fn sample_h_paths_parallel(
    model: &Model,
    state: &mut McmcState,
    ybar: &[Vec<f64>],
    exec: Execution,
    seed: u64,
) -> Result<Vec<bool>> {
    let n = state.n();
    let tr = Transform::new(&state.a_bar, &model.theta);
    let s = state.std_devs();
    let (h, phi, sigma2) = {
        let (h, phi, sigma2) = sv_parts(state);
        (h.clone(), phi.clone(), sigma2.clone())
    };
    let snapshot = &*state;
    let results = exec.map((0..n).collect(), |j| {
        let mut rng = rng_from_seed(derive_seed(seed, &[j as u64]));
        let partials = SeriesPartials::new(&tr, ybar, &snapshot.w, &s, j);
        let mut scale = snapshot.adapt.vol[j];
        h_step(&partials, &h[j], phi[j], sigma2[j], snapshot.adapt.vol_base[j], &mut scale, &mut rng)
            .map(|(path, acc)| (path, acc, scale))
    });
    let mut accepted = Vec::with_capacity(n);
    for (j, r) in results.into_iter().enumerate() {
        let (path, acc, scale) = r?;
        state.adapt.vol[j] = scale;
        if let VolState::Sv { h, .. } = &mut state.vol {
            h[j] = path;
        }
        accepted.push(acc);
    }
    Ok(accepted)
}

fn phi_log_prior(phi: f64, prior: &SvPrior) -> f64 {
    (prior.a_rho - 1.0) * (0.5 * (1.0 + phi)).ln() + (prior.b_rho - 1.0) * (0.5 * (1.0 - phi)).ln()
}

/// Random walk on atanh(φ) with the Jacobian log(1 − φ²); returns acceptance.
pub fn sample_phi<R: Rng + ?Sized>(state: &mut McmcState, j: usize, prior: &SvPrior, rng: &mut R) -> Result<bool> {
    let (h, phi, sigma2) = {
        let (h, phi, sigma2) = sv_parts(state);
        (h[j].clone(), phi[j], sigma2[j])
    };
    let target = |z: &[f64]| {
        let p = z[0].tanh();
        if !(p.abs() < 1.0) {
            return f64::NEG_INFINITY;
        }
        phi_log_prior(p, prior) + ar1_logprior(&h, p, sigma2) + (1.0 - p * p).ln()
    };
    let z0 = [phi.atanh()];
    let current = target(&z0);
    if current.is_nan() {
        return Err(Error::InvalidParameter(format!("persistence target undefined at φ={phi}")));
    }
    let mut scale = state.adapt.phi[j];
    let out = rwmh_step(&z0, current, target, &ProposalCov::identity(1), &scale, rng)?;
    scale.update(out.accepted);
    state.adapt.phi[j] = scale;
    if let VolState::Sv { phi, .. } = &mut state.vol {
        phi[j] = out.state[0].tanh();
    }
    Ok(out.accepted)
}

/// Conjugate inverse-gamma parameters (shape, rate) of σ²_h given h and φ.
pub fn sigma2_h_posterior(h: &[f64], phi: f64, prior: &SvPrior) -> (f64, f64) {
    let mut ss = (1.0 - phi * phi) * h[0] * h[0];
    for t in 1..h.len() {
        ss += (h[t] - phi * h[t - 1]).powi(2);
    }
    (prior.a_sigma + h.len() as f64 / 2.0, prior.b_sigma + 0.5 * ss)
}

pub fn sample_sigma2_h<R: Rng + ?Sized>(state: &mut McmcState, j: usize, prior: &SvPrior, rng: &mut R) -> f64 {
    let (shape, rate) = {
        let (h, phi, _) = sv_parts(state);
        sigma2_h_posterior(&h[j], phi[j], prior)
    };
    let draw = inv_gamma(shape, rate, rng);
    if let VolState::Sv { sigma2_h, .. } = &mut state.vol {
        sigma2_h[j] = draw;
    }
    draw
}
