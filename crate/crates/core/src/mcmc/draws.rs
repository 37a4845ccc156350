use std::io::Write;

use nalgebra::DMatrix;

use super::config::Regime;
use crate::distributions::GarchStatics;
use crate::error::Result;

/// Acceptance counts of one MH block over the whole run and over its final 20%.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAcceptance {
    pub block: String,
    pub target: f64,
    pub attempts: u64,
    pub accepted: u64,
    pub tail_attempts: u64,
    pub tail_accepted: u64,
}

impl BlockAcceptance {
    pub fn new(block: impl Into<String>, target: f64) -> Self {
        Self { block: block.into(), target, attempts: 0, accepted: 0, tail_attempts: 0, tail_accepted: 0 }
    }

    pub fn record(&mut self, accepted: bool, in_tail: bool) {
        self.attempts += 1;
        self.accepted += accepted as u64;
        if in_tail {
            self.tail_attempts += 1;
            self.tail_accepted += accepted as u64;
        }
    }

    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }

    pub fn tail_rate(&self) -> f64 {
        if self.tail_attempts == 0 {
            f64::NAN
        } else {
            self.tail_accepted as f64 / self.tail_attempts as f64
        }
    }
}

/// Volatility information at the end of the sample, as needed for forecasting.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalVol {
    Const { delta2: Vec<f64> },
    Sv { h_last: Vec<f64>, phi: Vec<f64>, sigma2_h: Vec<f64> },
    /// `sigma2_next` is the variance of the first out-of-sample period.
    Garch { statics: Vec<GarchStatics>, sigma2_next: Vec<f64> },
}

/// One kept posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub beta: Vec<f64>,
    pub a: DMatrix<f64>,
    pub vol: TerminalVol,
}

/// Thinned post-burn-in output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub regime: Regime,
    pub n: usize,
    pub k: usize,
    pub len: usize,
    pub levels: Vec<f64>,
    pub draws: Vec<Draw>,
    /// Posterior mean of w_t.
    pub w_mean: Vec<f64>,
    /// Posterior means of H_{t,jj} and ln H_{t,jj} (series-major).
    pub variance_mean: Vec<Vec<f64>>,
    pub log_variance_mean: Vec<Vec<f64>>,
    pub acceptance: Vec<BlockAcceptance>,
    /// Set when the h-paths were sampled with the parallel approximation.
    pub approximate: bool,
    pub seed: u64,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    pub fn beta_mean(&self) -> Vec<f64> {
        let m = self.draws.len() as f64;
        let mut out = vec![0.0; self.n * self.k];
        for d in &self.draws {
            for (o, b) in out.iter_mut().zip(&d.beta) {
                *o += b / m;
            }
        }
        out
    }

    /// Sorted draws of coefficient `i`.
    pub fn coefficient_draws(&self, i: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.draws.iter().map(|d| d.beta[i]).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Equal-tailed credible interval at the given level.
    pub fn credible_interval(&self, i: usize, level: f64) -> (f64, f64) {
        let v = self.coefficient_draws(i);
        let lo = quantile_sorted(&v, 0.5 * (1.0 - level));
        let hi = quantile_sorted(&v, 0.5 * (1.0 + level));
        (lo, hi)
    }

    pub fn acceptance_of(&self, block: &str) -> Option<&BlockAcceptance> {
        self.acceptance.iter().find(|a| a.block == block)
    }

    /// One row per draw: draw index followed by β in equation-major order.
    pub fn write_beta_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["draw".to_string()];
        for j in 0..self.n {
            for i in 0..self.k {
                header.push(format!("beta_{j}_{i}"));
            }
        }
        w.write_record(&header)?;
        for (d, draw) in self.draws.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(draw.beta.iter().map(|b| format!("{b:.10e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_acceptance_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["block", "target", "attempts", "rate", "final20_rate"])?;
        for a in &self.acceptance {
            w.write_record([
                a.block.clone(),
                format!("{:.2}", a.target),
                a.attempts.to_string(),
                format!("{:.4}", a.rate()),
                format!("{:.4}", a.tail_rate()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Posterior means of the volatility paths (series-major), one row per t.
    pub fn write_paths_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string(), "w_mean".to_string()];
        for j in 0..self.n {
            header.push(format!("var_mean_{j}"));
            header.push(format!("log_var_mean_{j}"));
        }
        w.write_record(&header)?;
        for t in 0..self.len {
            let mut rec = vec![t.to_string(), format!("{:.10e}", self.w_mean[t])];
            for j in 0..self.n {
                rec.push(format!("{:.10e}", self.variance_mean[j][t]));
                rec.push(format!("{:.10e}", self.log_variance_mean[j][t]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}
