use nalgebra::{DMatrix, DVector};

use super::common::{beta_conditional, residuals, sample_a_rows, sample_beta_gaussian, sample_w_gig};
use super::config::{Block, GarchInit, ModelSpec, Regime};
use super::constant::sample_delta2;
use super::draws::{BlockAcceptance, Draw, PosteriorDraws, TerminalVol};
use super::garch::{garch_next_variance, garch_paths, sample_beta_garch, sample_garch_statics, sample_w_garch};
use super::likelihood::Transform;
use super::state::{AdaptState, McmcState, VolState};
use super::sv::{sample_h_path, sample_h_paths_parallel, sample_phi, sample_sigma2_h};
use super::Model;
use crate::adapt::{AdaptiveScale, ProposalCov};
use crate::distributions::GarchStatics;
use crate::domain::{theta_params, RegressionDesign};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, rng_from_seed, Execution};

fn check_spec(spec: &ModelSpec, design: &RegressionDesign) -> Result<()> {
    if spec.levels.len() != design.n {
        return Err(Error::Dimension(format!(
            "{} quantile levels for {} series",
            spec.levels.len(),
            design.n
        )));
    }
    if design.len() < 2 {
        return Err(Error::InsufficientData("need at least two aligned observations".into()));
    }
    if let GarchInit::Fixed(v) = &spec.mcmc.garch_init {
        if v.len() != design.n || v.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidParameter("fixed GARCH initial variances must be positive, one per series".into()));
        }
    }
    spec.priors.validate()?;
    spec.mcmc.validate()
}

/// Empirical quantile (linear interpolation).
fn empirical_quantile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    super::draws::quantile_sorted(&s, p)
}

/// Starting values: least squares with a τ-quantile intercept shift, Ā = I, w = 1 and
/// scales matched to the residual variance.
pub fn initialize(spec: &ModelSpec, design: &RegressionDesign) -> Result<McmcState> {
    check_spec(spec, design)?;
    let (n, k, len) = (design.n, design.k, design.len());
    let theta = theta_params(&spec.levels);
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    for x in &design.x {
        for a in 0..k {
            for b in 0..k {
                xtx[(a, b)] += x[a] * x[b];
            }
        }
    }
    let ridge = 1e-8 * (1.0 + xtx.diagonal().max());
    for a in 0..k {
        xtx[(a, a)] += ridge;
    }
    let chol = nalgebra::Cholesky::new(xtx.clone())
        .ok_or(Error::NotPositiveDefinite { condition: crate::adapt::condition_estimate(&xtx) })?;
    let mut beta = vec![0.0; n * k];
    let mut scale_var = vec![0.0; n];
    let mut resid = vec![vec![0.0; len]; n];
    for j in 0..n {
        let xty = DVector::from_iterator(k, (0..k).map(|a| (0..len).map(|t| design.x[t][a] * design.y[t][j]).sum()));
        let b = chol.solve(&xty);
        for i in 0..k {
            beta[j * k + i] = b[i];
        }
        for t in 0..len {
            resid[j][t] = design.y[t][j] - (0..k).map(|i| b[i] * design.x[t][i]).sum::<f64>();
        }
        let m = resid[j].iter().sum::<f64>() / len as f64;
        let var = resid[j].iter().map(|e| (e - m).powi(2)).sum::<f64>() / len as f64;
        let mix = theta.theta1[j].powi(2) + theta.theta2[j].powi(2);
        scale_var[j] = (var / mix).max(1e-8);
        if design.intercept {
            let shift = empirical_quantile(&resid[j], spec.levels.as_slice()[j]);
            beta[j * k] += shift;
            for e in resid[j].iter_mut() {
                *e -= shift;
            }
        }
    }
    let (tm, tv) = (spec.mcmc.target_mh, spec.mcmc.target_h);
    let (vol, vol_scales, vol_base) = match spec.regime {
        Regime::Const => (
            VolState::Const { delta2: scale_var.clone() },
            vec![AdaptiveScale::new(0.05, tm); n],
            vec![1.0; n],
        ),
        Regime::Sv => {
            let (phi, s2) = (0.95, 0.05);
            let half = 5usize;
            let h = (0..n)
                .map(|j| {
                    let mix = theta.theta1[j].powi(2) + theta.theta2[j].powi(2);
                    (0..len)
                        .map(|t| {
                            let lo = t.saturating_sub(half);
                            let hi = (t + half + 1).min(len);
                            let m = resid[j][lo..hi].iter().map(|e| e * e).sum::<f64>() / (hi - lo) as f64;
                            (m.max(1e-4 * scale_var[j] * mix) / mix).ln()
                        })
                        .collect()
                })
                .collect();
            let base = s2 / (1.0 - phi * phi);
            (
                VolState::Sv { h, phi: vec![phi; n], sigma2_h: vec![s2; n] },
                vec![AdaptiveScale::new(0.1 / len as f64, tv); n],
                vec![base; n],
            )
        }
        Regime::Garch => {
            let statics: Vec<GarchStatics> =
                scale_var.iter().map(|v| GarchStatics { omega: v * 0.05, alpha: 0.05, gamma: 0.9 }).collect();
            let ybar: Vec<Vec<f64>> = (0..len).map(|t| design.residual(&beta, t)).collect();
            let w = vec![1.0; len];
            let sigma2 = garch_paths(&statics, &ybar, &w, &theta.theta1, &spec.mcmc.garch_init)?;
            let sigma2_init = sigma2.iter().map(|p| p[0]).collect();
            (
                VolState::Garch { statics, sigma2, sigma2_init },
                vec![AdaptiveScale::new(0.05, tm); n],
                vec![1.0; n],
            )
        }
    };
    let adapt = AdaptState {
        vol: vol_scales,
        vol_base,
        phi: if spec.regime == Regime::Sv { vec![AdaptiveScale::new(0.05, tm); n] } else { Vec::new() },
        w: if spec.regime == Regime::Garch { vec![AdaptiveScale::new(1.0, tm); len] } else { Vec::new() },
        beta: AdaptiveScale::new(2.38f64.powi(2) / (n * k) as f64, tm),
    };
    Ok(McmcState {
        beta,
        a_bar: DMatrix::identity(n, n),
        a: DMatrix::identity(n, n),
        w: vec![1.0; len],
        vol,
        adapt,
    })
}

/// Runs one chain from [`initialize`]d starting values.
pub fn run_chain(spec: &ModelSpec, design: &RegressionDesign, seed: u64) -> Result<PosteriorDraws> {
    let init = initialize(spec, design)?;
    run_chain_from(spec, design, init, seed, Execution::Sequential)
}

struct Trackers {
    beta: BlockAcceptance,
    w: BlockAcceptance,
    vol: Vec<BlockAcceptance>,
    phi: Vec<BlockAcceptance>,
}

impl Trackers {
    fn new(spec: &ModelSpec, n: usize) -> Self {
        let (tm, th) = (spec.mcmc.target_mh, spec.mcmc.target_h);
        let vol = (0..n)
            .map(|j| match spec.regime {
                Regime::Const => BlockAcceptance::new(format!("delta2[{j}]"), tm),
                Regime::Sv => BlockAcceptance::new(format!("h[{j}]"), th),
                Regime::Garch => BlockAcceptance::new(format!("garch[{j}]"), tm),
            })
            .collect();
        let phi = if spec.regime == Regime::Sv {
            (0..n).map(|j| BlockAcceptance::new(format!("phi[{j}]"), tm)).collect()
        } else {
            Vec::new()
        };
        Self { beta: BlockAcceptance::new("beta", tm), w: BlockAcceptance::new("w", tm), vol, phi }
    }

    fn into_vec(self, regime: Regime) -> Vec<BlockAcceptance> {
        let mut out = Vec::new();
        if regime == Regime::Garch {
            out.push(self.beta);
            out.push(self.w);
        }
        out.extend(self.vol);
        out.extend(self.phi);
        out.retain(|b| b.attempts > 0);
        out
    }
}

fn beta_proposal(model: &Model, state: &McmcState) -> Result<ProposalCov> {
    Ok(ProposalCov::PrecisionCholesky(beta_conditional(model, state)?.precision_chol))
}

/// Runs one chain from an explicit starting state. `exec` is only used by the
/// optional parallel h-path mode.
pub fn run_chain_from(
    spec: &ModelSpec,
    design: &RegressionDesign,
    mut state: McmcState,
    seed: u64,
    exec: Execution,
) -> Result<PosteriorDraws> {
    check_spec(spec, design)?;
    let (n, k, len) = (design.n, design.k, design.len());
    if state.n() != n || state.len() != len || state.beta.len() != n * k || state.vol.regime() != spec.regime {
        return Err(Error::Dimension("starting state does not match the model".into()));
    }
    let cfg = &spec.mcmc;
    let model = Model { design, theta: theta_params(&spec.levels), priors: &spec.priors };
    let mut rng = rng_from_seed(seed);
    let mut ybar = residuals(&model, &state.beta);
    let mut trackers = Trackers::new(spec, n);
    let mut warned = false;
    let total = cfg.total_iterations();
    let tail_start = total - total / 5;
    let mut beta_prop = if spec.regime == Regime::Garch && !cfg.fixed.beta { Some(beta_proposal(&model, &state)?) } else { None };

    let mut draws = Vec::with_capacity(cfg.keep);
    let mut w_mean = vec![0.0; len];
    let mut var_mean = vec![vec![0.0; len]; n];
    let mut logvar_mean = vec![vec![0.0; len]; n];

    for it in 0..total {
        if it == cfg.burn_in && cfg.freeze_adaptation {
            state.adapt.freeze();
        }
        if beta_prop.is_some() && cfg.burn_in >= 2 && it == cfg.burn_in / 2 {
            beta_prop = Some(beta_proposal(&model, &state)?);
        }
        let tail = it >= tail_start;
        for block in &cfg.sweep_order {
            let name = match block {
                Block::Beta => {
                    if !cfg.fixed.beta {
                        if spec.regime == Regime::Garch {
                            let prop = beta_prop.as_ref().expect("GARCH β proposal is prepared");
                            let acc = sample_beta_garch(&model, &mut state, &mut ybar, &cfg.garch_init, prop, &mut rng)?;
                            trackers.beta.record(acc, tail);
                        } else {
                            state.beta = sample_beta_gaussian(&model, &state, &mut rng)?;
                            ybar = residuals(&model, &state.beta);
                        }
                    }
                    "beta"
                }
                Block::A => {
                    if !cfg.fixed.a {
                        sample_a_rows(&model, &mut state, &ybar, &mut rng)?;
                    }
                    "A"
                }
                Block::W => {
                    if !cfg.fixed.w {
                        if spec.regime == Regime::Garch {
                            for acc in sample_w_garch(&model, &mut state, &ybar, &mut rng)? {
                                trackers.w.record(acc, tail);
                            }
                        } else {
                            let tr = Transform::new(&state.a_bar, &model.theta);
                            let s = state.std_devs();
                            for t in 0..len {
                                state.w[t] = sample_w_gig(&tr, &ybar[t], &s[t], &mut warned, &mut rng)?;
                            }
                        }
                    }
                    "w"
                }
                Block::Vol => {
                    update_vol(spec, &model, &mut state, &ybar, &mut trackers, tail, it, seed, exec, &mut rng)?;
                    "vol"
                }
            };
            if let Err(which) = state.check_invariants() {
                return Err(Error::Divergence { iteration: it, block: format!("{name} ({which})") });
            }
        }
        if it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0 {
            let m = (draws.len() + 1) as f64;
            for t in 0..len {
                w_mean[t] += (state.w[t] - w_mean[t]) / m;
                for j in 0..n {
                    let v = state.vol.variance(j, t);
                    var_mean[j][t] += (v - var_mean[j][t]) / m;
                    logvar_mean[j][t] += (v.ln() - logvar_mean[j][t]) / m;
                }
            }
            draws.push(Draw { beta: state.beta.clone(), a: state.a.clone(), vol: terminal_vol(&model, &state, &ybar) });
        }
    }
    Ok(PosteriorDraws {
        regime: spec.regime,
        n,
        k,
        len,
        levels: spec.levels.as_slice().to_vec(),
        draws,
        w_mean,
        variance_mean: var_mean,
        log_variance_mean: logvar_mean,
        acceptance: trackers.into_vec(spec.regime),
        approximate: spec.regime == Regime::Sv && cfg.sv_parallel,
        seed,
    })
}

#[allow(clippy::too_many_arguments)]
fn update_vol(
    spec: &ModelSpec,
    model: &Model,
    state: &mut McmcState,
    ybar: &[Vec<f64>],
    trackers: &mut Trackers,
    tail: bool,
    it: usize,
    seed: u64,
    exec: Execution,
    rng: &mut crate::exec::Rng,
) -> Result<()> {
    let cfg = &spec.mcmc;
    let n = state.n();
    match spec.regime {
        Regime::Const => {
            if !cfg.fixed.vol {
                for j in 0..n {
                    let acc = sample_delta2(model, state, ybar, j, rng)?;
                    trackers.vol[j].record(acc, tail);
                }
            }
        }
        Regime::Sv => {
            if !cfg.fixed.vol {
                if cfg.sv_parallel {
                    let sweep_seed = derive_seed(seed, &[it as u64, 0x5f]);
                    for (j, acc) in sample_h_paths_parallel(model, state, ybar, exec, sweep_seed)?.into_iter().enumerate() {
                        trackers.vol[j].record(acc, tail);
                    }
                } else {
                    for j in 0..n {
                        let acc = sample_h_path(model, state, ybar, j, rng)?;
                        trackers.vol[j].record(acc, tail);
                    }
                }
            }
            for j in 0..n {
                if !cfg.fixed.phi {
                    let acc = sample_phi(state, j, &model.priors.sv, rng)?;
                    trackers.phi[j].record(acc, tail);
                }
                if !cfg.fixed.sigma2_h {
                    sample_sigma2_h(state, j, &model.priors.sv, rng);
                }
            }
        }
        Regime::Garch => {
            if !cfg.fixed.vol {
                for j in 0..n {
                    let acc = sample_garch_statics(model, state, ybar, &cfg.garch_init, j, rng)?;
                    trackers.vol[j].record(acc, tail);
                }
            }
        }
    }
    Ok(())
}

fn terminal_vol(model: &Model, state: &McmcState, ybar: &[Vec<f64>]) -> TerminalVol {
    let last = state.len() - 1;
    match &state.vol {
        VolState::Const { delta2 } => TerminalVol::Const { delta2: delta2.clone() },
        VolState::Sv { h, phi, sigma2_h } => TerminalVol::Sv {
            h_last: h.iter().map(|p| p[last]).collect(),
            phi: phi.clone(),
            sigma2_h: sigma2_h.clone(),
        },
        VolState::Garch { statics, sigma2, .. } => TerminalVol::Garch {
            statics: statics.clone(),
            sigma2_next: (0..statics.len())
                .map(|j| garch_next_variance(&statics[j], ybar[last][j], state.w[last], model.theta.theta1[j], sigma2[j][last]))
                .collect(),
        },
    }
}
