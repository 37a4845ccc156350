//! Blocks shared by all regimes: β (Gaussian), rows of A⁻¹ and the GiG mixing variables.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::likelihood::Transform;
use super::state::McmcState;
use super::Model;
use crate::adapt::condition_estimate;
use crate::distributions::{gig_sample, std_normal, GigParams};
use crate::domain::invert_unit_lower;
use crate::error::{Error, Result};

/// Residual degeneracy guard for the GiG scale parameter.
pub const GIG_EPSILON: f64 = 1e-12;

/// N(mean, P⁻¹) stored through the lower Cholesky factor of the precision P.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional {
    pub mean: DVector<f64>,
    pub precision_chol: DMatrix<f64>,
}

impl GaussianConditional {
    /// Builds the conditional from precision P and right-hand side r (mean = P⁻¹r).
    pub fn from_precision(precision: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        let cond = condition_estimate(&precision);
        let chol = nalgebra::Cholesky::new(precision).ok_or(Error::NotPositiveDefinite { condition: cond })?;
        let mean = chol.solve(&rhs);
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite { condition: cond });
        }
        Ok(Self { mean, precision_chol: chol.l() })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        let z = DVector::from_iterator(n, (0..n).map(|_| std_normal(rng)));
        let v = self
            .precision_chol
            .tr_solve_lower_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        (0..n).map(|i| self.mean[i] + v[i]).collect()
    }

    /// Dense covariance (diagnostics and tests only).
    pub fn covariance(&self) -> DMatrix<f64> {
        let l = &self.precision_chol;
        let n = l.nrows();
        let linv = l.solve_lower_triangular(&DMatrix::identity(n, n)).expect("non-singular factor");
        linv.transpose() * linv
    }
}

/// ȳ_t = y_t − X_tβ for every t.
pub fn residuals(model: &Model, beta: &[f64]) -> Vec<Vec<f64>> {
    (0..model.design.len()).map(|t| model.design.residual(beta, t)).collect()
}

/// Gaussian full conditional of β given A, w and the scale paths.
pub fn beta_conditional(model: &Model, state: &McmcState) -> Result<GaussianConditional> {
    let d = model.design;
    let (n, k) = (d.n, d.k);
    let nk = n * k;
    let tr = Transform::new(&state.a_bar, &model.theta);
    let s = state.std_devs();
    let pv = 1.0 / model.priors.beta_var;
    let mut prec = DMatrix::from_diagonal_element(nk, nk, pv);
    let mut rhs = DVector::from_element(nk, pv * model.priors.beta_mean);
    let mut m = DMatrix::zeros(n, n);
    for t in 0..d.len() {
        let w = state.w[t];
        let x = &d.x[t];
        // M_t = Gᵀ·diag(1/(w·s²))·G
        for a in 0..n {
            for b in 0..=a {
                let v: f64 = (a.max(b)..n).map(|i| tr.g[(i, a)] * tr.g[(i, b)] / (w * s[t][i] * s[t][i])).sum();
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        let ytil: Vec<f64> = (0..n).map(|i| d.y[t][i] - w * model.theta.theta1[i] * s[t][i]).collect();
        for a in 0..n {
            let my: f64 = (0..n).map(|b| m[(a, b)] * ytil[b]).sum();
            for i in 0..k {
                rhs[a * k + i] += my * x[i];
            }
            for b in 0..n {
                let mab = m[(a, b)];
                if mab == 0.0 {
                    continue;
                }
                for i in 0..k {
                    let mx = mab * x[i];
                    let row = a * k + i;
                    for l in 0..k {
                        prec[(row, b * k + l)] += mx * x[l];
                    }
                }
            }
        }
    }
    GaussianConditional::from_precision(prec, rhs)
}

pub fn sample_beta_gaussian<R: Rng + ?Sized>(model: &Model, state: &McmcState, rng: &mut R) -> Result<Vec<f64>> {
    Ok(beta_conditional(model, state)?.sample(rng))
}

/// û_t = Θ₂⁻¹(ȳ_t − w_t·Θ₁·s_t).
fn scaled_innovations(model: &Model, state: &McmcState, ybar: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let th = &model.theta;
    let s = state.std_devs();
    ybar.iter()
        .enumerate()
        .map(|(t, yb)| {
            (0..yb.len()).map(|i| (yb[i] - state.w[t] * th.theta1[i] * s[t][i]) / th.theta2[i]).collect()
        })
        .collect()
}

/// Gaussian conditional of the free entries of row j (≥ 1) of Ā: a weighted regression
/// of û_j on −û_{1..j−1} with weights 1/(w_t·H_{t,jj}).
pub fn a_row_conditional(model: &Model, state: &McmcState, ybar: &[Vec<f64>], j: usize) -> Result<GaussianConditional> {
    if j == 0 || j >= state.n() {
        return Err(Error::Dimension(format!("row {j} of A has no free entries")));
    }
    let u = scaled_innovations(model, state, ybar);
    a_row_conditional_from(&u, &state.w, |t| state.vol.variance(j, t), j, model.priors.a_mean, model.priors.a_var)
}

fn a_row_conditional_from(
    u: &[Vec<f64>],
    w: &[f64],
    var_j: impl Fn(usize) -> f64,
    j: usize,
    prior_mean: f64,
    prior_var: f64,
) -> Result<GaussianConditional> {
    let mut prec = DMatrix::from_diagonal_element(j, j, 1.0 / prior_var);
    let mut rhs = DVector::from_element(j, prior_mean / prior_var);
    for t in 0..u.len() {
        let wt = 1.0 / (w[t] * var_j(t));
        for a in 0..j {
            rhs[a] += wt * (-u[t][a]) * u[t][j];
            for b in 0..j {
                prec[(a, b)] += wt * u[t][a] * u[t][b];
            }
        }
    }
    GaussianConditional::from_precision(prec, rhs)
}

/// Draws every free row of Ā and refreshes A = Ā⁻¹.
pub fn sample_a_rows<R: Rng + ?Sized>(model: &Model, state: &mut McmcState, ybar: &[Vec<f64>], rng: &mut R) -> Result<()> {
    let n = state.n();
    if n < 2 {
        return Ok(());
    }
    let u = scaled_innovations(model, state, ybar);
    for j in 1..n {
        let cond =
            a_row_conditional_from(&u, &state.w, |t| state.vol.variance(j, t), j, model.priors.a_mean, model.priors.a_var)?;
        let draw = cond.sample(rng);
        for (l, v) in draw.into_iter().enumerate() {
            state.a_bar[(j, l)] = v;
        }
    }
    state.a = invert_unit_lower(&state.a_bar);
    Ok(())
}

/// GiG parameters (p, a, b) of the full conditional of w_t.
pub fn w_gig_params(tr: &Transform, ybar_t: &[f64], s_t: &[f64]) -> (f64, f64, f64) {
    let n = tr.dim();
    let q = tr.apply_g(ybar_t);
    let cs = tr.apply_c(s_t);
    let a = 2.0 + (0..n).map(|i| (cs[i] / s_t[i]).powi(2)).sum::<f64>();
    let b = (0..n).map(|i| (q[i] / s_t[i]).powi(2)).sum::<f64>();
    (1.0 - n as f64 / 2.0, a, b)
}

/// One draw of w_t. A zero residual with p ≤ 0 leaves the GiG undefined; b is then
/// replaced by [`GIG_EPSILON`] and `warned` is set (the caller logs once per run).
pub fn sample_w_gig<R: Rng + ?Sized>(
    tr: &Transform,
    ybar_t: &[f64],
    s_t: &[f64],
    warned: &mut bool,
    rng: &mut R,
) -> Result<f64> {
    let (p, a, mut b) = w_gig_params(tr, ybar_t, s_t);
    if b == 0.0 && p <= 0.0 {
        if !*warned {
            log::warn!("zero residual in the mixing-variable update; using b = {GIG_EPSILON:e}");
            *warned = true;
        }
        b = GIG_EPSILON;
    }
    let params = GigParams::new(p, a, b)?;
    Ok(gig_sample(&params, rng))
}
