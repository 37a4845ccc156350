use nalgebra::DMatrix;
use rand::Rng;

use super::{std_exp, std_normal, LN_2PI};
use crate::domain::ThetaParams;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_real_line, Tolerance};

fn check_dims(location: &[f64], theta: &ThetaParams, a: &DMatrix<f64>, h: &[f64]) -> Result<usize> {
    let n = location.len();
    if theta.theta1.len() != n || theta.theta2.len() != n || a.nrows() != n || a.ncols() != n || h.len() != n {
        return Err(Error::Dimension(format!(
            "location {n}, theta {}/{}, A {}x{}, H {}",
            theta.theta1.len(),
            theta.theta2.len(),
            a.nrows(),
            a.ncols(),
            h.len()
        )));
    }
    Ok(n)
}

/// location + w·H^{1/2}θ₁ + √w·Θ₂·A·H^{1/2}·z for a given mixing value w.
pub fn mal_sample_given_w<R: Rng + ?Sized>(
    location: &[f64],
    theta: &ThetaParams,
    a: &DMatrix<f64>,
    h: &[f64],
    w: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = check_dims(location, theta, a, h)?;
    let sd: Vec<f64> = h.iter().map(|v| v.sqrt()).collect();
    let e: Vec<f64> = (0..n).map(|i| sd[i] * std_normal(rng)).collect();
    let sw = w.sqrt();
    Ok((0..n)
        .map(|i| {
            let ae: f64 = (0..=i).map(|l| a[(i, l)] * e[l]).sum();
            location[i] + w * sd[i] * theta.theta1[i] + sw * theta.theta2[i] * ae
        })
        .collect())
}

/// One draw from the multivariate asymmetric Laplace law via its Exp(1) mixture.
pub fn mal_sample<R: Rng + ?Sized>(
    location: &[f64],
    theta: &ThetaParams,
    a: &DMatrix<f64>,
    h: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let w = std_exp(rng);
    mal_sample_given_w(location, theta, a, h, w, rng)
}

/// log density of the MAL law, integrating the Gaussian mixture over w numerically.
pub fn mal_logpdf_oracle(
    y: &[f64],
    location: &[f64],
    theta: &ThetaParams,
    a: &DMatrix<f64>,
    h: &[f64],
) -> Result<f64> {
    let n = check_dims(location, theta, a, h)?;
    if y.len() != n {
        return Err(Error::Dimension(format!("y has length {}, expected {n}", y.len())));
    }
    // L = Θ₂·A·H^{1/2} is the lower Cholesky factor of the covariance at w = 1.
    let sd: Vec<f64> = h.iter().map(|v| v.sqrt()).collect();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            l[(i, j)] = theta.theta2[i] * a[(i, j)] * sd[j];
        }
    }
    let resid = nalgebra::DVector::from_iterator(n, (0..n).map(|i| y[i] - location[i]));
    let shift = nalgebra::DVector::from_iterator(n, (0..n).map(|i| sd[i] * theta.theta1[i]));
    let r = l.solve_lower_triangular(&resid).ok_or(Error::NotPositiveDefinite { condition: f64::INFINITY })?;
    let d = l.solve_lower_triangular(&shift).ok_or(Error::NotPositiveDefinite { condition: f64::INFINITY })?;
    let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let (rr, rd, dd) = (r.dot(&r), r.dot(&d), d.dot(&d));
    let nf = n as f64;
    // Integrand in s = ln w (includes the Jacobian w):
    // −n/2·ln2π − log|L| − n/2·s − (rr − 2w·rd + w²·dd)/(2w) − w + s
    let g = |s: f64| {
        let w = s.exp();
        let inner = if rr > 0.0 { 0.5 * rr / w } else { 0.0 };
        let outer = if dd > 0.0 { 0.5 * w * dd } else { 0.0 };
        -0.5 * nf * LN_2PI - log_det - 0.5 * nf * s - inner + rd - outer - w + s
    };
    // The integrand is concave in s; locate its maximum by golden-section search.
    let (mut lo, mut hi) = (-60.0f64, 10.0f64);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let s_star = 0.5 * (lo + hi);
    let g_star = g(s_star);
    let curv = {
        let e = 1e-3;
        -(g(s_star + e) - 2.0 * g_star + g(s_star - e)) / (e * e)
    };
    let width = if curv > 0.0 && curv.is_finite() { 1.0 / curv.sqrt() } else { 1.0 };
    let integral = integrate_real_line(|u| (g(s_star + width * u) - g_star).exp(), Tolerance::default())?;
    if !(integral > 0.0) {
        return Err(Error::Quadrature("mixture integral vanished".into()));
    }
    Ok(g_star + integral.ln() + width.ln())
}
