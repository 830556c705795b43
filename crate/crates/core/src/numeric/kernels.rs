//! Scalar kernels shared by the generators, the network and the losses.

use crate::error::{Error, Result};

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, stable for large |x|.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Clamp `x` into `[lo, hi]`. Requires `lo <= hi`.
pub fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi, "clip bounds inverted: {lo} > {hi}");
    x.max(lo).min(hi)
}

pub fn standardize(v: f64, mean: f64, sd: f64) -> Result<f64> {
    if sd <= 0.0 || !sd.is_finite() {
        return Err(Error::InvalidInput(format!(
            "standardize needs a positive finite scale, got {sd}"
        )));
    }
    Ok((v - mean) / sd)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}
