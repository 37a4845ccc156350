#![allow(dead_code)]

use nalgebra::DMatrix;
use qvar::data::TimeSeriesPanel;
use qvar::distributions::mal_sample;
use qvar::domain::{build_var_design, theta_params, QuantileLevels, RegressionDesign};
use qvar::exec::rng_from_seed;
use qvar::mcmc::{ModelSpec, Regime};

/// Scale path used by the simulators.
pub enum ScalePath {
    Constant(Vec<f64>),
    /// Log-variance AR(1): (phi, sigma2_h, mean)
    Sv(f64, f64, f64),
}

pub struct QvarSim {
    pub rows: Vec<Vec<f64>>,
    /// Log-variance of each row, T rows of n values.
    pub log_var: Vec<Vec<f64>>,
}

/// Simulates a VAR(1) whose innovations are MAL with the given quantile levels, so
/// that the location of each equation is intercept + slope·y_{t-1}.
pub fn simulate_qvar(
    intercept: &[f64],
    slopes: &DMatrix<f64>,
    a: &DMatrix<f64>,
    levels: &QuantileLevels,
    scale: &ScalePath,
    len: usize,
    seed: u64,
) -> QvarSim {
    let n = intercept.len();
    let theta = theta_params(levels);
    let mut rng = rng_from_seed(seed);
    let mut y = vec![vec![0.0; n]];
    let mut lv = Vec::new();
    let mut logh = vec![0.0; n];
    if let ScalePath::Sv(_, _, m) = scale {
        logh = vec![*m; n];
    }
    for _ in 0..len + 50 {
        let prev = y.last().unwrap().clone();
        let loc: Vec<f64> = (0..n).map(|i| intercept[i] + (0..n).map(|l| slopes[(i, l)] * prev[l]).sum::<f64>()).collect();
        let h: Vec<f64> = match scale {
            ScalePath::Constant(v) => v.clone(),
            ScalePath::Sv(phi, s2, m) => {
                for lh in logh.iter_mut() {
                    *lh = m + phi * (*lh - m) + s2.sqrt() * qvar::distributions::std_normal(&mut rng);
                }
                logh.iter().map(|v| v.exp()).collect()
            }
        };
        lv.push(h.iter().map(|v| v.ln()).collect::<Vec<f64>>());
        y.push(mal_sample(&loc, &theta, a, &h, &mut rng).unwrap());
    }
    QvarSim { rows: y.split_off(51), log_var: lv.split_off(50) }
}

pub fn design_of(rows: Vec<Vec<f64>>) -> RegressionDesign {
    let n = rows[0].len();
    let names = (0..n).map(|j| format!("y{j}")).collect();
    let panel = TimeSeriesPanel::from_rows(rows, names).unwrap();
    build_var_design(&panel, 1, true).unwrap()
}

pub fn short_spec(regime: Regime, levels: QuantileLevels, burn_in: usize, keep: usize) -> ModelSpec {
    let mut spec = ModelSpec::new(regime, levels);
    spec.mcmc.burn_in = burn_in;
    spec.mcmc.keep = keep;
    spec
}

pub fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
}

/// Piecewise-linear CDF built from density values on a grid.
pub struct GridCdf {
    x: Vec<f64>,
    cum: Vec<f64>,
}

impl GridCdf {
    pub fn from_density(x: Vec<f64>, d: &[f64]) -> Self {
        let mut cum = vec![0.0; x.len()];
        for i in 1..x.len() {
            cum[i] = cum[i - 1] + 0.5 * (d[i] + d[i - 1]) * (x[i] - x[i - 1]);
        }
        let total = cum[x.len() - 1];
        for c in cum.iter_mut() {
            *c /= total;
        }
        Self { x, cum }
    }

    pub fn from_log_density(x: Vec<f64>, logd: &[f64]) -> Self {
        let m = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let d: Vec<f64> = logd.iter().map(|v| (v - m).exp()).collect();
        Self::from_density(x, &d)
    }

    pub fn cdf(&self, v: f64) -> f64 {
        if v <= self.x[0] {
            return 0.0;
        }
        let last = self.x.len() - 1;
        if v >= self.x[last] {
            return 1.0;
        }
        let i = self.x.partition_point(|g| *g <= v);
        let (x0, x1) = (self.x[i - 1], self.x[i]);
        let f = (v - x0) / (x1 - x0);
        self.cum[i - 1] + f * (self.cum[i] - self.cum[i - 1])
    }

    /// Mass at the two ends of the grid, as a check that the grid covers the law.
    pub fn edge_density(&self) -> f64 {
        let last = self.x.len() - 1;
        (self.cum[1] - self.cum[0]).max(self.cum[last] - self.cum[last - 1])
    }
}

/// Marginal CDFs on each axis of a product grid from an unnormalized log density.
pub fn grid_marginals(axes: &[Vec<f64>], logf: impl Fn(&[f64]) -> f64) -> Vec<GridCdf> {
    let dims: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let total: usize = dims.iter().product();
    let mut vals = Vec::with_capacity(total);
    let mut point = vec![0.0; axes.len()];
    for idx in 0..total {
        let mut r = idx;
        for d in (0..axes.len()).rev() {
            point[d] = axes[d][r % dims[d]];
            r /= dims[d];
        }
        vals.push(logf(&point));
    }
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut marg: Vec<Vec<f64>> = dims.iter().map(|&k| vec![0.0; k]).collect();
    for (idx, v) in vals.iter().enumerate() {
        let p = (v - m).exp();
        let mut r = idx;
        for d in (0..axes.len()).rev() {
            marg[d][r % dims[d]] += p;
            r /= dims[d];
        }
    }
    axes.iter().zip(marg).map(|(a, d)| GridCdf::from_density(a.clone(), &d)).collect()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// KS distance where the CDF is accumulated from increments between consecutive
/// sorted points, for CDFs that are expensive to evaluate from scratch.
pub fn ks_distance_incremental(
    sample: &[f64],
    first: impl Fn(f64) -> f64,
    increment: impl Fn(f64, f64) -> f64,
) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut f = first(s[0]);
    let mut worst = f.max(1.0 / n - f);
    for i in 1..s.len() {
        f += increment(s[i - 1], s[i]);
        worst = worst.max((f - i as f64 / n).max((i + 1) as f64 / n - f));
    }
    worst
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Monte Carlo standard error of the mean by non-overlapping batch means.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&x[b * size..(b + 1) * size])).collect();
    let m = mean(&means);
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
