use nalgebra::DMatrix;
use rand::Rng;
use statrs::function::gamma::ln_gamma;

use super::{gamma_rate, std_normal};
use crate::error::{Error, Result};

/// Multivariate skew-t as a scale mixture of a skew-normal vector.
///
/// Construction: with Ω = D·R·D (D the diagonal of marginal scales, R a correlation
/// matrix), X₁ ~ N(0, R), X₀ a vector of independent |N(0,1)|, and
/// δᵢ = αᵢ/√(1+αᵢ²),
///
///   uᵢ = δᵢ·X₀ᵢ + √(1−δᵢ²)·X₁ᵢ,   y = D·u / √(V/ν) − E[·],   V ~ χ²_ν.
///
/// With α = 0 this is the multivariate t with scale Ω. Draws are centred to mean zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewTParams {
    pub dof: f64,
    pub skew: Vec<f64>,
    pub scale: DMatrix<f64>,
    chol_corr: DMatrix<f64>,
    sd: Vec<f64>,
    mean_shift: Vec<f64>,
}

impl SkewTParams {
    pub fn new(dof: f64, skew: Vec<f64>, scale: DMatrix<f64>) -> Result<Self> {
        if !(dof > 2.0) {
            return Err(Error::InvalidParameter(format!("skew-t degrees of freedom {dof} must exceed 2")));
        }
        let n = skew.len();
        if scale.nrows() != n || scale.ncols() != n {
            return Err(Error::Dimension(format!("skew length {n} vs scale {}x{}", scale.nrows(), scale.ncols())));
        }
        let sd: Vec<f64> = (0..n).map(|i| scale[(i, i)].sqrt()).collect();
        if sd.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("scale diagonal must be positive".into()));
        }
        let corr = DMatrix::from_fn(n, n, |i, j| scale[(i, j)] / (sd[i] * sd[j]));
        let chol = nalgebra::Cholesky::new(corr).ok_or(Error::NotPositiveDefinite { condition: f64::INFINITY })?;
        // E[(V/ν)^{−1/2}] for V ~ χ²_ν.
        let e_mix = (dof / 2.0).sqrt() * (ln_gamma((dof - 1.0) / 2.0) - ln_gamma(dof / 2.0)).exp();
        let mean_shift = skew
            .iter()
            .zip(&sd)
            .map(|(&al, &s)| s * e_mix * al / (1.0 + al * al).sqrt() * (2.0 / std::f64::consts::PI).sqrt())
            .collect();
        Ok(Self { dof, skew, scale, chol_corr: chol.l(), sd, mean_shift })
    }

    pub fn dim(&self) -> usize {
        self.skew.len()
    }
}

pub fn skewt_sample<R: Rng + ?Sized>(params: &SkewTParams, rng: &mut R) -> Vec<f64> {
    let n = params.dim();
    let z: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
    let x0: Vec<f64> = (0..n).map(|_| std_normal(rng).abs()).collect();
    let v = 2.0 * gamma_rate(params.dof / 2.0, 1.0, rng);
    let mix = (params.dof / v).sqrt();
    (0..n)
        .map(|i| {
            let x1: f64 = (0..=i).map(|l| params.chol_corr[(i, l)] * z[l]).sum();
            let delta = params.skew[i] / (1.0 + params.skew[i] * params.skew[i]).sqrt();
            let u = delta * x0[i] + (1.0 - delta * delta).sqrt() * x1;
            params.sd[i] * u * mix - params.mean_shift[i]
        })
        .collect()
}
