//! Conditional Gaussian likelihood of the mixture representation.
//!
//! With G = Ā·Θ₂⁻¹ and C = Ā·Θ₂⁻¹·Θ₁ (both lower triangular), the residual
//! ȳ_t = y_t − X_tβ satisfies
//!
//!   z̄_t = (G·ȳ_t − w_t·C·s_t)/√w_t ~ N(0, diag(s_t²)),
//!
//! where s_t = H_t^{1/2}. Everything the sampler evaluates reduces to this
//! triangular transformation.

use nalgebra::{DMatrix, DVector};

use crate::distributions::LN_2PI;
use crate::domain::ThetaParams;

#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub g: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// log |G| = −Σ ln θ₂ⱼ.
    pub log_jacobian: f64,
}

impl Transform {
    pub fn new(a_bar: &DMatrix<f64>, theta: &ThetaParams) -> Self {
        let n = a_bar.nrows();
        let g = DMatrix::from_fn(n, n, |i, l| if l <= i { a_bar[(i, l)] / theta.theta2[l] } else { 0.0 });
        let c = DMatrix::from_fn(n, n, |i, l| g[(i, l)] * theta.theta1[l]);
        let log_jacobian = -theta.theta2.iter().map(|v| v.ln()).sum::<f64>();
        Self { g, c, log_jacobian }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// G·v for lower-triangular G.
    pub fn apply_g(&self, v: &[f64]) -> Vec<f64> {
        lower_mul(&self.g, v)
    }

    pub fn apply_c(&self, v: &[f64]) -> Vec<f64> {
        lower_mul(&self.c, v)
    }
}

pub(crate) fn lower_mul(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..=i).map(|l| m[(i, l)] * v[l]).sum()).collect()
}

/// Joint log-likelihood of one observation given (w, s).
pub fn loglik_t(tr: &Transform, ybar: &[f64], w: f64, s: &[f64]) -> f64 {
    let n = tr.dim();
    let q = tr.apply_g(ybar);
    let cs = tr.apply_c(s);
    let mut ll = tr.log_jacobian - 0.5 * n as f64 * (LN_2PI + w.ln());
    for i in 0..n {
        let e = q[i] - w * cs[i];
        ll -= s[i].ln() + 0.5 * e * e / (w * s[i] * s[i]);
    }
    ll
}

/// Sum of [`loglik_t`] over the sample; `ybar`, `s` are time-major.
pub fn loglik(tr: &Transform, ybar: &[Vec<f64>], w: &[f64], s: &[Vec<f64>]) -> f64 {
    (0..ybar.len()).map(|t| loglik_t(tr, &ybar[t], w[t], &s[t])).sum()
}

/// Dense evaluation of log N(ȳ; w·Θ₁·s, w·Θ₂·A·H·Aᵀ·Θ₂) by Cholesky factorization.
pub fn direct_loglik_t(ybar: &[f64], w: f64, theta: &ThetaParams, a: &DMatrix<f64>, s: &[f64]) -> f64 {
    let n = ybar.len();
    let h: Vec<f64> = s.iter().map(|v| v * v).collect();
    let sigma = crate::domain::implied_sigma(a, &h);
    let cov = DMatrix::from_fn(n, n, |i, j| w * theta.theta2[i] * sigma[(i, j)] * theta.theta2[j]);
    let chol = nalgebra::Cholesky::new(cov).expect("covariance of a valid state is positive definite");
    let r = DVector::from_iterator(n, (0..n).map(|i| ybar[i] - w * theta.theta1[i] * s[i]));
    let v = chol.l().solve_lower_triangular(&r).expect("triangular factor is non-singular");
    let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * n as f64 * LN_2PI - log_det - 0.5 * v.dot(&v)
}

/// The series-j transformed response: ỹʲ_t = A_t⁻¹ȳ_t − Σ_{i≠j} Ã_{t,:i}·s_i with
/// A_t = √w·Θ₂·A and Ã_t = A_t⁻¹·w·Θ₁.
pub fn transformed_response(tr: &Transform, ybar: &[f64], w: f64, s: &[f64], j: usize) -> Vec<f64> {
    let n = tr.dim();
    let q = tr.apply_g(ybar);
    let sw = w.sqrt();
    (0..n)
        .map(|i| {
            let cross: f64 = (0..=i).filter(|&l| l != j).map(|l| tr.c[(i, l)] * s[l]).sum();
            q[i] / sw - sw * cross
        })
        .collect()
}

/// Joint log-likelihood rebuilt from the series-j regression
/// ỹʲ_t = √w·C_{:,j}·s_j + z̄_t, z̄_t ~ N(0, H_t).
pub fn per_series_loglik_t(tr: &Transform, ybar: &[f64], w: f64, s: &[f64], j: usize) -> f64 {
    let n = tr.dim();
    let yt = transformed_response(tr, ybar, w, s, j);
    let sw = w.sqrt();
    let mut ll = tr.log_jacobian - 0.5 * n as f64 * (LN_2PI + w.ln());
    for i in 0..n {
        let mean = if i >= j { sw * tr.c[(i, j)] * s[j] } else { 0.0 };
        let e = yt[i] - mean;
        ll -= s[i].ln() + 0.5 * e * e / (s[i] * s[i]);
    }
    ll
}

/// Pre-computed pieces of the likelihood that do not involve the scale path of
/// series j, so that candidate paths s_j can be scored in O(T·(n−j)).
#[derive(Debug, Clone)]
pub struct SeriesPartials {
    j: usize,
    /// P_{t,i} = q_{t,i} − w_t·Σ_{l≤i, l≠j} c_{il}·s_{t,l}, for i ≥ j (time-major).
    partial: Vec<Vec<f64>>,
    /// s_{t,i} for i > j.
    other_s: Vec<Vec<f64>>,
    /// c_{ij} for i ≥ j.
    c_col: Vec<f64>,
    w: Vec<f64>,
}

impl SeriesPartials {
    pub fn new(tr: &Transform, ybar: &[Vec<f64>], w: &[f64], s: &[Vec<f64>], j: usize) -> Self {
        let n = tr.dim();
        let len = ybar.len();
        let mut partial = Vec::with_capacity(len);
        let mut other_s = Vec::with_capacity(len);
        for t in 0..len {
            let q = tr.apply_g(&ybar[t]);
            partial.push(
                (j..n)
                    .map(|i| q[i] - w[t] * (0..=i).filter(|&l| l != j).map(|l| tr.c[(i, l)] * s[t][l]).sum::<f64>())
                    .collect(),
            );
            other_s.push(s[t][j + 1..].to_vec());
        }
        Self { j, partial, other_s, c_col: (j..n).map(|i| tr.c[(i, j)]).collect(), w: w.to_vec() }
    }

    pub fn series(&self) -> usize {
        self.j
    }

    /// Log-likelihood as a function of the series-j standard deviation path,
    /// up to terms that do not depend on it.
    pub fn loglik(&self, sj: &[f64]) -> f64 {
        let mut ll = 0.0;
        for t in 0..self.partial.len() {
            let w = self.w[t];
            let p = &self.partial[t];
            let s = sj[t];
            let e = p[0] - w * self.c_col[0] * s;
            ll -= s.ln() + 0.5 * e * e / (w * s * s);
            for (m, si) in self.other_s[t].iter().enumerate() {
                let e = p[m + 1] - w * self.c_col[m + 1] * s;
                ll -= 0.5 * e * e / (w * si * si);
            }
        }
        ll
    }

    /// Same as [`Self::loglik`] for a constant path.
    pub fn loglik_const(&self, sj: f64) -> f64 {
        let mut ll = 0.0;
        for t in 0..self.partial.len() {
            let w = self.w[t];
            let p = &self.partial[t];
            let e = p[0] - w * self.c_col[0] * sj;
            ll -= sj.ln() + 0.5 * e * e / (w * sj * sj);
            for (m, si) in self.other_s[t].iter().enumerate() {
                let e = p[m + 1] - w * self.c_col[m + 1] * sj;
                ll -= 0.5 * e * e / (w * si * si);
            }
        }
        ll
    }
}
