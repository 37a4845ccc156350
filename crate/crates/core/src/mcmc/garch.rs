//! GARCH(1,1) blocks: variance recursion, parameter triples, mixing variables and β by MH.

use rand::Rng;

use super::common::residuals;
use super::config::GarchInit;
use super::likelihood::{loglik_t, SeriesPartials, Transform};
use super::state::{McmcState, VolState};
use super::Model;
use crate::adapt::{rwmh_lognormal_step, rwmh_step, ProposalCov};
use crate::distributions::GarchStatics;
use crate::error::{Error, Result};

/// σ²_t = ω + α(ȳ_{t−1} − w_{t−1}θ₁σ_{t−1})² + γσ²_{t−1}, starting from `sigma2_init`.
pub fn garch_recursion(
    statics: &GarchStatics,
    ybar_j: &[f64],
    w: &[f64],
    theta1: f64,
    sigma2_init: f64,
    series: usize,
) -> Result<Vec<f64>> {
    let mut path = Vec::with_capacity(ybar_j.len());
    path.push(sigma2_init);
    for t in 1..ybar_j.len() {
        let prev = path[t - 1];
        let e = ybar_j[t - 1] - w[t - 1] * theta1 * prev.sqrt();
        let v = statics.omega + statics.alpha * e * e + statics.gamma * prev;
        if !v.is_finite() || !(v > 0.0) {
            return Err(Error::VarianceOverflow { series, t });
        }
        path.push(v);
    }
    Ok(path)
}

/// Variance for the period after the sample.
pub fn garch_next_variance(statics: &GarchStatics, ybar_last: f64, w_last: f64, theta1: f64, sigma2_last: f64) -> f64 {
    let e = ybar_last - w_last * theta1 * sigma2_last.sqrt();
    statics.omega + statics.alpha * e * e + statics.gamma * sigma2_last
}

pub fn initial_variance(init: &GarchInit, statics: &GarchStatics, j: usize) -> f64 {
    match init {
        GarchInit::Unconditional => statics.unconditional_variance(),
        GarchInit::Fixed(v) => v[j],
    }
}

/// Series-major variance paths for every series.
pub fn garch_paths(
    statics: &[GarchStatics],
    ybar: &[Vec<f64>],
    w: &[f64],
    theta1: &[f64],
    init: &GarchInit,
) -> Result<Vec<Vec<f64>>> {
    (0..statics.len())
        .map(|j| {
            let col: Vec<f64> = ybar.iter().map(|r| r[j]).collect();
            garch_recursion(&statics[j], &col, w, theta1[j], initial_variance(init, &statics[j], j), j)
        })
        .collect()
}

fn garch_parts(state: &McmcState) -> (&Vec<GarchStatics>, &Vec<Vec<f64>>) {
    match &state.vol {
        VolState::Garch { statics, sigma2, .. } => (statics, sigma2),
        _ => panic!("GARCH block called on a different regime"),
    }
}

/// Joint log-normal random walk on (ω_j, α_j, γ_j); returns acceptance.
pub fn sample_garch_statics<R: Rng + ?Sized>(
    model: &Model,
    state: &mut McmcState,
    ybar: &[Vec<f64>],
    init: &GarchInit,
    j: usize,
    rng: &mut R,
) -> Result<bool> {
    let tr = Transform::new(&state.a_bar, &model.theta);
    let s = state.std_devs();
    let partials = SeriesPartials::new(&tr, ybar, &state.w, &s, j);
    let col: Vec<f64> = ybar.iter().map(|r| r[j]).collect();
    let theta1 = model.theta.theta1[j];
    let prior = &model.priors.garch;
    let w = state.w.clone();
    let mut last_path = None;
    let target = |x: &[f64], keep: &mut Option<Vec<f64>>| {
        let st = GarchStatics { omega: x[0], alpha: x[1], gamma: x[2] };
        let lp = prior.log_density(&st);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        match garch_recursion(&st, &col, &w, theta1, initial_variance(init, &st, j), j) {
            Ok(path) => {
                let sd: Vec<f64> = path.iter().map(|v| v.sqrt()).collect();
                let v = lp + partials.loglik(&sd);
                *keep = Some(path);
                if v.is_finite() {
                    v
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let cur = garch_parts(state).0[j];
    let x0 = [cur.omega, cur.alpha, cur.gamma];
    let mut scratch = None;
    let current = target(&x0, &mut scratch);
    let base = state.adapt.vol_base[j];
    let mut scale = state.adapt.vol[j];
    let out = rwmh_lognormal_step(
        &x0,
        current,
        |x| target(x, &mut last_path),
        &ProposalCov::Diagonal(vec![base; 3]),
        &scale,
        rng,
    )?;
    scale.update(out.accepted);
    state.adapt.vol[j] = scale;
    if out.accepted {
        let path = last_path.expect("accepted proposal has a variance path");
        if let VolState::Garch { statics, sigma2, sigma2_init } = &mut state.vol {
            statics[j] = GarchStatics { omega: out.state[0], alpha: out.state[1], gamma: out.state[2] };
            sigma2_init[j] = path[0];
            sigma2[j] = path;
        }
    }
    Ok(out.accepted)
}

/// Forward pass of log-normal MH updates of w_t. Each target includes the Exp(1)
/// prior and the likelihood of every period from t on, with the variance paths
/// recomputed downstream of t. Returns per-t acceptance flags.
pub fn sample_w_garch<R: Rng + ?Sized>(model: &Model, state: &mut McmcState, ybar: &[Vec<f64>], rng: &mut R) -> Result<Vec<bool>> {
    let n = state.n();
    let len = state.len();
    let tr = Transform::new(&state.a_bar, &model.theta);
    let theta1 = model.theta.theta1.clone();
    let (statics, mut sigma2) = {
        let (st, s2) = garch_parts(state);
        (st.clone(), s2.clone())
    };
    let any_arch = statics.iter().any(|s| s.alpha > 0.0);
    let sd_at = |sig: &Vec<Vec<f64>>, t: usize| -> Vec<f64> { (0..n).map(|j| sig[j][t].sqrt()).collect() };
    let mut per_t: Vec<f64> = (0..len).map(|t| loglik_t(&tr, &ybar[t], state.w[t], &sd_at(&sigma2, t))).collect();
    let mut accepted = Vec::with_capacity(len);
    for t in 0..len {
        let end = if any_arch { len } else { t + 1 };
        let w_cur = state.w[t];
        let current = -w_cur + per_t[t..end].iter().sum::<f64>();
        let mut cand_paths: Vec<Vec<f64>> = Vec::new();
        let mut cand_ll: Vec<f64> = Vec::new();
        let target = |x: &[f64]| {
            let wt = x[0];
            cand_paths.clear();
            cand_ll.clear();
            // Downstream variances, rows ℓ = t+1..end−1 of every series.
            let mut local: Vec<Vec<f64>> = (0..n).map(|j| sigma2[j][t..end].to_vec()).collect();
            for j in 0..n {
                if statics[j].alpha == 0.0 {
                    continue;
                }
                for l in 1..local[j].len() {
                    let tt = t + l;
                    let prev = local[j][l - 1];
                    let wp = if tt - 1 == t { wt } else { state.w[tt - 1] };
                    let e = ybar[tt - 1][j] - wp * theta1[j] * prev.sqrt();
                    let v = statics[j].omega + statics[j].alpha * e * e + statics[j].gamma * prev;
                    if !v.is_finite() {
                        return f64::NEG_INFINITY;
                    }
                    local[j][l] = v;
                }
            }
            let mut total = -wt;
            for l in 0..end - t {
                let tt = t + l;
                let sd: Vec<f64> = (0..n).map(|j| local[j][l].sqrt()).collect();
                let wl = if tt == t { wt } else { state.w[tt] };
                let ll = loglik_t(&tr, &ybar[tt], wl, &sd);
                cand_ll.push(ll);
                total += ll;
            }
            cand_paths = local;
            if total.is_finite() {
                total
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut scale = state.adapt.w[t];
        let out = rwmh_lognormal_step(&[w_cur], current, target, &ProposalCov::identity(1), &scale, rng)?;
        scale.update(out.accepted);
        state.adapt.w[t] = scale;
        if out.accepted {
            state.w[t] = out.state[0];
            for j in 0..n {
                sigma2[j][t..end].copy_from_slice(&cand_paths[j]);
            }
            per_t[t..end].copy_from_slice(&cand_ll);
        }
        accepted.push(out.accepted);
    }
    if let VolState::Garch { sigma2: s2, .. } = &mut state.vol {
        *s2 = sigma2;
    }
    Ok(accepted)
}

/// Random-walk MH on β with the variance paths recomputed under each proposal.
/// On acceptance `ybar` is replaced by the new residuals.
pub fn sample_beta_garch<R: Rng + ?Sized>(
    model: &Model,
    state: &mut McmcState,
    ybar: &mut Vec<Vec<f64>>,
    init: &GarchInit,
    proposal: &ProposalCov,
    rng: &mut R,
) -> Result<bool> {
    let tr = Transform::new(&state.a_bar, &model.theta);
    let statics = garch_parts(state).0.clone();
    let pr = model.priors;
    let w = state.w.clone();
    let mut keep: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = None;
    let eval = |beta: &[f64], store: bool, keep: &mut Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>| {
        let lp: f64 = -0.5 * beta.iter().map(|b| (b - pr.beta_mean).powi(2)).sum::<f64>() / pr.beta_var;
        let yb = residuals(model, beta);
        let paths = match garch_paths(&statics, &yb, &w, &model.theta.theta1, init) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        let n = paths.len();
        let ll: f64 = (0..yb.len())
            .map(|t| {
                let sd: Vec<f64> = (0..n).map(|j| paths[j][t].sqrt()).collect();
                loglik_t(&tr, &yb[t], w[t], &sd)
            })
            .sum();
        if store {
            *keep = Some((yb, paths));
        }
        let v = lp + ll;
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let beta0 = state.beta.clone();
    let current = eval(&beta0, false, &mut None);
    let mut scale = state.adapt.beta;
    let out = rwmh_step(&beta0, current, |b| eval(b, true, &mut keep), proposal, &scale, rng)?;
    scale.update(out.accepted);
    state.adapt.beta = scale;
    if out.accepted {
        let (yb, paths) = keep.expect("accepted proposal was evaluated");
        state.beta = out.state;
        *ybar = yb;
        if let VolState::Garch { sigma2, sigma2_init, .. } = &mut state.vol {
            for (j, p) in paths.iter().enumerate() {
                sigma2_init[j] = p[0];
            }
            *sigma2 = paths;
        }
    }
    Ok(out.accepted)
}
