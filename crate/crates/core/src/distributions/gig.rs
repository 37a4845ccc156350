use rand::Rng;

use super::{gamma_rate, open_uniform};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_real_line, Tolerance};

/// Generalized inverse Gaussian with density ∝ x^{p−1} exp(−(a·x + b/x)/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub p: f64,
    pub a: f64,
    pub b: f64,
}

impl GigParams {
    pub fn new(p: f64, a: f64, b: f64) -> Result<Self> {
        let ok = p.is_finite()
            && a.is_finite()
            && b.is_finite()
            && a >= 0.0
            && b >= 0.0
            && ((a > 0.0 && b > 0.0) || (p > 0.0 && a > 0.0) || (p < 0.0 && b > 0.0));
        if ok {
            Ok(Self { p, a, b })
        } else {
            Err(Error::GigRegion { p, a, b })
        }
    }

    pub fn log_kernel(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.p - 1.0) * x.ln() - 0.5 * (self.a * x + self.b / x)
    }
}

fn log_quasi(x: f64, lambda: f64, omega: f64) -> f64 {
    if x > 0.0 {
        (lambda - 1.0) * x.ln() - 0.5 * omega * (x + 1.0 / x)
    } else {
        f64::NEG_INFINITY
    }
}

fn mode(lambda: f64, omega: f64) -> f64 {
    if lambda < 1.0 {
        omega / (((lambda - 1.0).powi(2) + omega * omega).sqrt() + 1.0 - lambda)
    } else {
        (((1.0 - lambda).powi(2) + omega * omega).sqrt() - (1.0 - lambda)) / omega
    }
}

/// Draws from the two-parameter form ∝ x^{λ−1} exp(−ω(x+1/x)/2), λ ≥ 0, ω > 0
/// (Hörmann & Leydold's ratio-of-uniforms / three-region rejection scheme).
fn sample_standard<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let m = mode(lambda, omega);
    if lambda >= 1.0 || omega > 1.0 {
        // Ratio of uniforms with mode shift.
        let a2 = -2.0 * (lambda + 1.0) / omega - m;
        let a1 = 2.0 * m * (lambda - 1.0) / omega - 1.0;
        let p1 = a1 - a2 * a2 / 3.0;
        let q1 = 2.0 * a2.powi(3) / 27.0 - a2 * a1 / 3.0 + m;
        let phi = (-q1 * (-27.0 / p1.powi(3)).sqrt() / 2.0).clamp(-1.0, 1.0).acos();
        let s1 = -(-4.0 * p1 / 3.0).sqrt();
        let root1 = s1 * (phi / 3.0 + std::f64::consts::PI / 3.0).cos() - a2 / 3.0;
        let root2 = -s1 * (phi / 3.0).cos() - a2 / 3.0;
        let lm = log_quasi(m, lambda, omega);
        let vmin = (root1 - m) * (0.5 * (log_quasi(root1, lambda, omega) - lm)).exp();
        let vmax = (root2 - m) * (0.5 * (log_quasi(root2, lambda, omega) - lm)).exp();
        loop {
            let u = open_uniform(rng);
            let v = vmin + (vmax - vmin) * rng.random::<f64>();
            let x = v / u + m;
            if 2.0 * u.ln() <= log_quasi(x, lambda, omega) - lm {
                return x;
            }
        }
    } else if omega >= f64::min(0.5, 2.0 * (1.0 - lambda).sqrt() / 3.0) {
        // Ratio of uniforms without mode shift.
        let lumax = 0.5 * log_quasi(m, lambda, omega);
        let xplus = ((1.0 + lambda) + ((1.0 + lambda).powi(2) + omega * omega).sqrt()) / omega;
        let vmax = (0.5 * (log_quasi(xplus, lambda, omega) - 2.0 * lumax) + xplus.ln()).exp();
        loop {
            let u = open_uniform(rng);
            let v = vmax * rng.random::<f64>();
            let x = v / u;
            if 2.0 * u.ln() <= log_quasi(x, lambda, omega) - 2.0 * lumax {
                return x;
            }
        }
    } else {
        // Three-region rejection for small ω and λ < 1.
        let x0 = omega / (1.0 - lambda);
        let xs = x0.max(2.0 / omega);
        let k1 = log_quasi(m, lambda, omega).exp();
        let a1 = k1 * x0;
        let (k2, a2) = if x0 < 2.0 / omega {
            let k2 = (-omega).exp();
            let a2 = if lambda > 0.0 {
                k2 * ((2.0 / omega).powf(lambda) - x0.powf(lambda)) / lambda
            } else {
                k2 * (2.0 / (omega * omega)).ln()
            };
            (k2, a2)
        } else {
            (0.0, 0.0)
        };
        let k3 = xs.powf(lambda - 1.0);
        let a3 = 2.0 * k3 * (-xs * omega / 2.0).exp() / omega;
        let total = a1 + a2 + a3;
        loop {
            let u = open_uniform(rng);
            let v = total * rng.random::<f64>();
            let (x, h) = if v <= a1 {
                (x0 * v / a1, k1)
            } else if v <= a1 + a2 {
                let x = if lambda > 0.0 {
                    (x0.powf(lambda) + (v - a1) * lambda / k2).powf(1.0 / lambda)
                } else {
                    omega * ((v - a1) * omega.exp()).exp()
                };
                (x, k2 * x.powf(lambda - 1.0))
            } else {
                let z = (-xs * omega / 2.0).exp() - omega * (v - a1 - a2) / (2.0 * k3);
                let x = -2.0 / omega * z.ln();
                (x, k3 * (-x * omega / 2.0).exp())
            };
            if x > 0.0 && x.is_finite() && (u * h).ln() <= log_quasi(x, lambda, omega) {
                return x;
            }
        }
    }
}

/// One GiG(p, a, b) variate.
pub fn gig_sample<R: Rng + ?Sized>(params: &GigParams, rng: &mut R) -> f64 {
    let GigParams { p, a, b } = *params;
    if b == 0.0 {
        return gamma_rate(p, a / 2.0, rng);
    }
    if a == 0.0 {
        return 1.0 / gamma_rate(-p, b / 2.0, rng);
    }
    let omega = (a * b).sqrt();
    let scale = (b / a).sqrt();
    // Below this ω the law is indistinguishable in double precision from its
    // gamma / inverse-gamma limit, and the ratio-of-uniforms bounds lose accuracy.
    if omega < 1e-10 && p != 0.0 {
        return if p > 0.0 {
            gamma_rate(p, a / 2.0, rng)
        } else {
            1.0 / gamma_rate(-p, b / 2.0, rng)
        };
    }
    let y = sample_standard(p.abs(), omega, rng);
    if p < 0.0 {
        scale / y
    } else {
        scale * y
    }
}

/// Mode of the kernel in s = ln x and the curvature-based width there.
fn log_scale_center(p: f64, a: f64, b: f64) -> (f64, f64) {
    let center = if a > 0.0 {
        (p + (p * p + a * b).sqrt()) / a
    } else {
        -b / (2.0 * p)
    };
    let curvature = 0.5 * (a * center + b / center);
    (center, 1.0 / curvature.sqrt())
}

/// log ∫₀^∞ x^{p−1} exp(−(a·x + b/x)/2) dx by quadrature in log-coordinates.
pub fn gig_log_kernel_integral(p: f64, a: f64, b: f64) -> Result<f64> {
    GigParams::new(p, a, b)?;
    let (center, width) = log_scale_center(p, a, b);
    let ell = |s: f64| {
        let up = if a > 0.0 { a * center * s.exp() } else { 0.0 };
        let down = if b > 0.0 { b / center * (-s).exp() } else { 0.0 };
        p * s - 0.5 * (up + down)
    };
    let l0 = ell(0.0);
    let integral = integrate_real_line(|u| (ell(width * u) - l0).exp(), Tolerance::default())?;
    Ok(integral.ln() + width.ln() + l0 + p * center.ln())
}

/// Normalized GiG density with a cached normalizer.
#[derive(Debug, Clone, Copy)]
pub struct GigDensity {
    pub params: GigParams,
    log_norm: f64,
    log_center: f64,
    width: f64,
}

impl GigDensity {
    pub fn new(params: GigParams) -> Result<Self> {
        let log_norm = gig_log_kernel_integral(params.p, params.a, params.b)?;
        let (center, width) = log_scale_center(params.p, params.a, params.b);
        Ok(Self { params, log_norm, log_center: center.ln(), width })
    }

    pub fn logpdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::InvalidParameter(format!("GiG density at non-positive x={x}")));
        }
        Ok(self.params.log_kernel(x) - self.log_norm)
    }

    /// E[X^r] from the ratio of kernel integrals.
    pub fn raw_moment(&self, r: f64) -> Result<f64> {
        let GigParams { p, a, b } = self.params;
        Ok((gig_log_kernel_integral(p + r, a, b)? - self.log_norm).exp())
    }

    /// P(X ≤ x) by quadrature of the normalized density.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        self.cdf_increment(0.0, x)
    }

    /// Density of s = ln X.
    fn log_density(&self, s: f64) -> f64 {
        let x = s.exp();
        if x == 0.0 || !x.is_finite() {
            return 0.0;
        }
        (self.params.log_kernel(x) + s - self.log_norm).exp()
    }

    /// ∫_{−∞}^{top} of the log-coordinate density.
    fn lower_tail(&self, top: f64, tol: Tolerance) -> Result<f64> {
        let w = self.width;
        integrate(
            |t| {
                let d = 1.0 - t;
                let s = top - w * t / d;
                if !s.is_finite() {
                    return 0.0;
                }
                let v = self.log_density(s);
                if v == 0.0 {
                    0.0
                } else {
                    v * w / (d * d)
                }
            },
            0.0,
            1.0,
            tol,
        )
    }

    /// P(lo < X ≤ hi), integrating in log-coordinates.
    pub fn cdf_increment(&self, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let tol = Tolerance { abs: 1e-14, rel: 1e-10, max_intervals: 4000 };
        let top = hi.ln();
        if lo <= 0.0 {
            let c = self.log_center;
            if top <= c {
                return self.lower_tail(top, tol);
            }
            return Ok(self.lower_tail(c, tol)? + integrate(|s| self.log_density(s), c, top, tol)?);
        }
        integrate(|s| self.log_density(s), lo.ln(), top, tol)
    }
}

/// Normalized log density; the normalizer is obtained by adaptive quadrature.
pub fn gig_logpdf(x: f64, params: &GigParams) -> Result<f64> {
    GigDensity::new(*params)?.logpdf(x)
}
