//! Distribution samplers on top of [`RngStream`].

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Gamma, Normal, StandardNormal};

use super::RngStream;
use crate::error::{Error, Result};

/// Inverse-gamma draw, computed as `scale / Gamma(shape, 1)`.
pub fn sample_inv_gamma(shape: f64, scale: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "inverse-gamma parameters must be positive, got shape={shape}, scale={scale}"
        )));
    }
    let gamma = Gamma::new(shape, 1.0).map_err(|e| Error::InvalidInput(e.to_string()))?;
    loop {
        let g: f64 = gamma.sample(rng);
        if g > 0.0 {
            return Ok(scale / g);
        }
    }
}

pub fn sample_normal(mean: f64, sd: f64, rng: &mut RngStream) -> Result<f64> {
    let n = Normal::new(mean, sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(n.sample(rng))
}

pub fn standard_normal(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

pub fn sample_uniform(lo: f64, hi: f64, rng: &mut RngStream) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// `Binomial(1, p)` draw as 0.0 / 1.0.
pub fn sample_bernoulli(p: f64, rng: &mut RngStream) -> Result<f64> {
    let b = Bernoulli::new(p).map_err(|e| Error::InvalidInput(format!("p={p}: {e}")))?;
    Ok(if b.sample(rng) { 1.0 } else { 0.0 })
}

/// Fisher-Yates permutation of `0..n`.
pub fn permutation(n: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
