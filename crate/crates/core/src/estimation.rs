//! MC-dropout prediction, the ATE estimate, and aggregation over repetitions.

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{forward, DropoutMode, Parameters};
use crate::numeric::kernels::{mean, sample_sd};
use crate::numeric::RngStream;

pub const DEFAULT_MC_PASSES: usize = 30;
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

/// Per-row means of the outcome heads across passes, with across-pass
/// standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct McPrediction {
    pub mu0: Array1<f64>,
    pub mu1: Array1<f64>,
    pub mu0_sd: Array1<f64>,
    pub mu1_sd: Array1<f64>,
    pub passes: usize,
}

struct Welford {
    mean: Array1<f64>,
    m2: Array1<f64>,
    k: usize,
}

impl Welford {
    fn new(n: usize) -> Self {
        Self {
            mean: Array1::zeros(n),
            m2: Array1::zeros(n),
            k: 0,
        }
    }

    fn push(&mut self, x: &Array1<f64>) {
        self.k += 1;
        let k = self.k as f64;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / k;
            self.m2[i] += delta * (x[i] - self.mean[i]);
        }
    }

    fn sd(&self) -> Array1<f64> {
        if self.k < 2 {
            return Array1::zeros(self.mean.len());
        }
        let d = (self.k - 1) as f64;
        self.m2.mapv(|v| (v / d).sqrt())
    }
}

/// Averages `passes` forward passes with freshly sampled dropout masks.
pub fn predict_mc_dropout(
    params: &Parameters,
    covariates: ArrayView2<'_, f64>,
    passes: usize,
    rng: &mut RngStream,
) -> Result<McPrediction> {
    if passes == 0 {
        return Err(Error::InvalidInput("MC-dropout needs at least one pass".into()));
    }
    let n = covariates.nrows();
    let (mut w0, mut w1) = (Welford::new(n), Welford::new(n));
    for _ in 0..passes {
        let out = forward(params, covariates, DropoutMode::Sampled(rng))?.output;
        w0.push(&out.mu0);
        w1.push(&out.mu1);
    }
    Ok(McPrediction {
        mu0_sd: w0.sd(),
        mu1_sd: w1.sd(),
        mu0: w0.mean,
        mu1: w1.mean,
        passes,
    })
}

/// One forward pass with dropout off.
pub fn predict_point(params: &Parameters, covariates: ArrayView2<'_, f64>) -> Result<McPrediction> {
    let out = forward(params, covariates, DropoutMode::Off)?.output;
    let n = out.n_rows();
    Ok(McPrediction {
        mu0: out.mu0,
        mu1: out.mu1,
        mu0_sd: Array1::zeros(n),
        mu1_sd: Array1::zeros(n),
        passes: 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub tau_hat: f64,
    pub mu0_hat: Vec<f64>,
    pub mu1_hat: Vec<f64>,
    pub mu0_sd: Vec<f64>,
    pub mu1_sd: Vec<f64>,
    pub mc_passes: usize,
}

/// Mean of `mu1_hat - mu0_hat`.
pub fn estimate_ate(mu0_hat: &[f64], mu1_hat: &[f64]) -> Result<AteEstimate> {
    if mu0_hat.len() != mu1_hat.len() {
        return Err(Error::Shape(format!(
            "mu0_hat has {} rows, mu1_hat has {}",
            mu0_hat.len(),
            mu1_hat.len()
        )));
    }
    if mu0_hat.is_empty() {
        return Err(Error::InvalidInput("cannot estimate an ATE from zero rows".into()));
    }
    let diffs: Vec<f64> = mu1_hat.iter().zip(mu0_hat).map(|(a, b)| a - b).collect();
    Ok(AteEstimate {
        tau_hat: mean(&diffs),
        mu0_hat: mu0_hat.to_vec(),
        mu1_hat: mu1_hat.to_vec(),
        mu0_sd: vec![0.0; mu0_hat.len()],
        mu1_sd: vec![0.0; mu0_hat.len()],
        mc_passes: 1,
    })
}

impl AteEstimate {
    pub fn from_prediction(p: &McPrediction) -> Result<Self> {
        let s = |a: &Array1<f64>| a.to_vec();
        Ok(AteEstimate {
            mu0_sd: s(&p.mu0_sd),
            mu1_sd: s(&p.mu1_sd),
            mc_passes: p.passes,
            ..estimate_ate(&s(&p.mu0), &s(&p.mu1))?
        })
    }
}

pub fn mae(tau_hat: f64, tau_true: f64) -> f64 {
    (tau_hat - tau_true).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub mean_mae: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub b: usize,
}

/// Mean and normal-approximation 95% interval, `mean +- 1.96 sd / sqrt(B)`.
pub fn aggregate(maes: &[f64]) -> Result<AggregateResult> {
    if maes.is_empty() {
        return Err(Error::InvalidInput("aggregate needs at least one value".into()));
    }
    let m = mean(maes);
    let sd = sample_sd(maes);
    let half = Z_95 * sd / (maes.len() as f64).sqrt();
    Ok(AggregateResult {
        mean_mae: m,
        sd,
        ci_low: m - half,
        ci_high: m + half,
        b: maes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;
    use ndarray::Array2;

    fn net(rate: f64) -> Parameters {
        let cfg = NetworkConfig {
            input_dim: 3,
            shared_widths: vec![8, 8],
            head_widths: vec![4],
            dropout_rate: rate,
            ..NetworkConfig::default()
        };
        Parameters::init(&cfg, &RngStream::new(11)).unwrap()
    }

    fn x() -> Array2<f64> {
        Array2::from_shape_fn((6, 3), |(i, j)| ((i + 2 * j) as f64).cos())
    }

    #[test]
    fn ate_cases() {
        assert_eq!(estimate_ate(&[1.0, 2.0], &[3.0, 5.0]).unwrap().tau_hat, 2.5);
        assert_eq!(estimate_ate(&[1.0, 4.0], &[1.0, 4.0]).unwrap().tau_hat, 0.0);
        let shifted = estimate_ate(&[0.5, -1.0, 2.0], &[1.25, -0.25, 2.75]).unwrap();
        assert!((shifted.tau_hat - 0.75).abs() < 1e-15);
        assert!(estimate_ate(&[], &[]).is_err());
    }

    #[test]
    fn mae_cases() {
        assert_eq!(mae(2.0, 3.0), 1.0);
        assert_eq!(mae(3.0, 2.0), mae(2.0, 3.0));
        assert_eq!(mae(1.5, 1.5), 0.0);
    }

    #[test]
    fn aggregate_cases() {
        let a = aggregate(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(a.mean_mae, 2.0);
        assert_eq!(a.sd, 1.0);
        assert!((a.ci_high - (2.0 + 1.96 / 3f64.sqrt())).abs() < 1e-15);
        let same = aggregate(&[0.7; 5]).unwrap();
        assert_eq!((same.ci_low, same.ci_high), (0.7, 0.7));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn zero_rate_matches_dropout_off() {
        let p = net(0.0);
        let mc = predict_mc_dropout(&p, x().view(), 30, &mut RngStream::new(1)).unwrap();
        let off = predict_point(&p, x().view()).unwrap();
        assert_eq!(mc.mu0, off.mu0);
        assert_eq!(mc.mu1, off.mu1);
        assert!(mc.mu0_sd.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn single_pass_is_one_sampled_forward() {
        let p = net(0.5);
        let mc = predict_mc_dropout(&p, x().view(), 1, &mut RngStream::new(3)).unwrap();
        let mut r = RngStream::new(3);
        let one = forward(&p, x().view(), DropoutMode::Sampled(&mut r)).unwrap().output;
        assert_eq!(mc.mu0, one.mu0);
        assert_eq!(mc.mu1, one.mu1);
    }

    #[test]
    fn positive_rate_spreads() {
        let p = net(0.5);
        let mc = predict_mc_dropout(&p, x().view(), 30, &mut RngStream::new(5)).unwrap();
        assert!(mc.mu0_sd.iter().all(|&s| s > 0.0));
    }
}
