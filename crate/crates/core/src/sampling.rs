//! Seeded predictor and noise generation.
//!
//! Every replication owns a ChaCha8 stream selected by `(seed, stream_id)`.
//! Normals are produced by inverting the standard normal CDF, so each
//! uniform yields exactly one draw and coupled arms consume identical counts.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::MeanFunction;
use crate::design::DesignDensity;
use crate::error::{Error, Result};

pub const RNG_ALGORITHM: &str = "ChaCha8";

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        standard_normal().inverse_cdf(self.next_uniform())
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}

#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub xs: Vec<f64>,
    pub us: Vec<f64>,
    pub design: String,
    pub seed: u64,
    pub stream_id: u64,
}

pub fn sample_predictors(design: &DesignDensity, n: usize, stream: &mut RngStream) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::Usage("sample size must be at least 1".into()));
    }
    let us: Vec<f64> = (0..n).map(|_| stream.next_uniform()).collect();
    let xs = us.iter().map(|&u| design.quantile_unchecked(u)).collect();
    Ok(SampleBatch { xs, us, design: design.label().to_string(), seed: stream.seed, stream_id: stream.stream_id })
}

/// One uniform vector mapped through every design's quantile function.
pub fn coupled_predictors(designs: &[DesignDensity], n: usize, stream: &mut RngStream) -> Result<Vec<SampleBatch>> {
    if n == 0 {
        return Err(Error::Usage("sample size must be at least 1".into()));
    }
    if let Some(first) = designs.first() {
        if designs.iter().any(|d| d.support() != first.support()) {
            return Err(Error::Usage("coupled designs must share a support".into()));
        }
    }
    let us: Vec<f64> = (0..n).map(|_| stream.next_uniform()).collect();
    Ok(designs
        .iter()
        .map(|d| SampleBatch {
            xs: us.iter().map(|&u| d.quantile_unchecked(u)).collect(),
            us: us.clone(),
            design: d.label().to_string(),
            seed: stream.seed,
            stream_id: stream.stream_id,
        })
        .collect())
}

/// Standard normal draws for noise sharing across arms.
pub fn standard_normals(n: usize, stream: &mut RngStream) -> Vec<f64> {
    (0..n).map(|_| stream.next_normal()).collect()
}

/// `y_i = m(x_i) + √σ² z_i`.
pub fn simulate_responses(xs: &[f64], m: &MeanFunction, sigma2: f64, stream: &mut RngStream) -> Result<Vec<f64>> {
    let z = standard_normals(xs.len(), stream);
    responses_from_normals(xs, m, sigma2, &z)
}

pub fn responses_from_normals(xs: &[f64], m: &MeanFunction, sigma2: f64, z: &[f64]) -> Result<Vec<f64>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Usage(format!("noise variance must be nonnegative, got {sigma2}")));
    }
    let sd = sigma2.sqrt();
    Ok(xs.iter().zip(z).map(|(&x, &e)| m.eval(x) + sd * e).collect())
}
