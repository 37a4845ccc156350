//! Samplers and density oracles for the laws used by the model and the simulation study.

mod garch_prior;
mod gig;
mod mal;
mod skewt;

pub use garch_prior::{truncated_garch_prior_sample, GarchPrior, GarchStatics, REJECTION_CAP};
pub use gig::{gig_log_kernel_integral, gig_logpdf, gig_sample, GigDensity, GigParams};
pub use mal::{mal_logpdf_oracle, mal_sample, mal_sample_given_w};
pub use skewt::{skewt_sample, SkewTParams};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// A standard normal draw.
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// A uniform draw on (0, 1].
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Gamma(shape, rate).
pub fn gamma_rate<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng)
}

/// Inverse-gamma(shape, rate): the reciprocal of a Gamma(shape, rate) draw.
pub fn inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    1.0 / gamma_rate(shape, rate, rng)
}

/// Exponential(1).
pub fn std_exp<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -open_uniform(rng).ln()
}

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
