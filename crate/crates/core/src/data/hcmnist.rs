//! HCMNIST: MNIST images as high-dimensional covariates with treatment and
//! outcome driven by a one-dimensional summary `phi` of each image.
//!
//! For a target digit `c` with average-intensity statistics `(mu_c, sd_c)`
//! and range `[lo_c, hi_c]`:
//!
//! ```text
//! z   = clip((mean_intensity - mu_c) / sd_c, -1.4, 1.4)
//! phi = (z + 1.4) * (hi_c - lo_c) / 2.8 + lo_c
//! T   ~ Bernoulli(sigmoid(2 phi + 0.5))
//! Y   = (2t-1) phi + (2t-1) - 2 sin(2 (2t-1) phi) + 2 (1 + 0.5 phi) + eps,  eps ~ N(0, 1)
//! ```
//!
//! [`PhiMap::Literal`] switches to `(z - lo_c) * (hi_c - lo_c) / 2.8`, which
//! does not keep `phi` inside `[lo_c, hi_c]`.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mnist::ImageSet;
use super::{DomainDataset, GroundTruth};
use crate::error::{Error, Result};
use crate::numeric::kernels::{clip, mean, sample_sd, sigmoid};
use crate::numeric::sampling::{permutation, standard_normal};
use crate::numeric::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PhiMap {
    /// Affine map sending `[-clip, clip]` onto `[lo_c, hi_c]`.
    #[default]
    Corrected,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HcmnistConfig {
    /// `(c_i, c_j)`; drawn at random when absent.
    pub target_digits: Option<[u8; 2]>,
    pub range_first: [f64; 2],
    pub range_second: [f64; 2],
    pub clip_bound: f64,
    pub phi_map: PhiMap,
    /// Subsample the target domain to at most this many rows.
    pub max_target: Option<usize>,
    /// Subsample the source domain to at most this many rows.
    pub max_source: Option<usize>,
    pub seed: u64,
}

impl Default for HcmnistConfig {
    fn default() -> Self {
        Self {
            target_digits: None,
            range_first: [-2.0, 0.0],
            range_second: [0.0, 2.0],
            clip_bound: 1.4,
            phi_map: PhiMap::Corrected,
            max_target: None,
            max_source: None,
            seed: 0,
        }
    }
}

impl HcmnistConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some([a, b]) = self.target_digits {
            if a > 9 || b > 9 || a == b {
                return Err(Error::InvalidConfig(format!(
                    "target digits must be two distinct values in 0..=9, got ({a}, {b})"
                )));
            }
        }
        for r in [self.range_first, self.range_second] {
            if !(r[0] < r[1]) {
                return Err(Error::InvalidConfig(format!("empty phi range [{}, {}]", r[0], r[1])));
            }
        }
        if !(self.clip_bound > 0.0) {
            return Err(Error::InvalidConfig("clip_bound must be positive".into()));
        }
        Ok(())
    }

    fn range_of(&self, digits: [u8; 2], digit: u8) -> Result<[f64; 2]> {
        if digit == digits[0] {
            Ok(self.range_first)
        } else if digit == digits[1] {
            Ok(self.range_second)
        } else {
            Err(Error::InvalidInput(format!(
                "digit {digit} is not one of the target digits ({}, {})",
                digits[0], digits[1]
            )))
        }
    }
}

/// Average-intensity statistics of one digit class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitStats {
    pub mean: f64,
    pub sd: f64,
}

/// Maps average intensities of images of `digit` to `phi`.
pub fn compute_phi(
    mean_intensities: &[f64],
    digit: u8,
    digits: [u8; 2],
    stats: DigitStats,
    config: &HcmnistConfig,
) -> Result<Vec<f64>> {
    let [lo, hi] = config.range_of(digits, digit)?;
    if !(stats.sd > 0.0) {
        return Err(Error::InvalidInput(format!(
            "digit {digit} has zero intensity spread; phi is undefined"
        )));
    }
    let bound = config.clip_bound;
    let width = 2.0 * bound;
    Ok(mean_intensities
        .iter()
        .map(|&x| {
            let z = clip((x - stats.mean) / stats.sd, -bound, bound);
            match config.phi_map {
                PhiMap::Corrected => (z + bound) * (hi - lo) / width + lo,
                PhiMap::Literal => (z - lo) * (hi - lo) / width,
            }
        })
        .collect())
}

/// Noise-free outcome surface.
pub fn outcome_mean(t: f64, phi: f64) -> f64 {
    let s = 2.0 * t - 1.0;
    s * phi + s - 2.0 * (2.0 * s * phi).sin() + 2.0 * (1.0 + 0.5 * phi)
}

pub fn propensity(phi: f64) -> f64 {
    sigmoid(2.0 * phi + 0.5)
}

#[derive(Debug, Clone)]
pub struct HcmnistDataset {
    pub target: DomainDataset,
    pub source: DomainDataset,
    pub phi: Vec<f64>,
    /// Digit of each target row.
    pub target_labels: Vec<u8>,
    pub digits: [u8; 2],
    pub stats: [DigitStats; 2],
}

pub fn generate_hcmnist(
    images: &ImageSet,
    config: &HcmnistConfig,
    rng: &RngStream,
) -> Result<HcmnistDataset> {
    config.validate()?;
    let digits = match config.target_digits {
        Some(d) => d,
        None => {
            let mut r = rng.derive(1);
            let a = r.random_range(0..10u8);
            let b = (a + r.random_range(1..10u8)) % 10;
            [a, b]
        }
    };

    let intensities: Vec<f64> = (0..images.len()).map(|i| images.mean_intensity(i)).collect();
    let mut stats = [DigitStats { mean: 0.0, sd: 0.0 }; 2];
    for (k, &d) in digits.iter().enumerate() {
        let vals: Vec<f64> = (0..images.len())
            .filter(|&i| images.labels[i] == d)
            .map(|i| intensities[i])
            .collect();
        if vals.is_empty() {
            return Err(Error::InvalidInput(format!("no images of target digit {d}")));
        }
        stats[k] = DigitStats {
            mean: mean(&vals),
            sd: sample_sd(&vals),
        };
    }

    let mut target_rows: Vec<usize> = (0..images.len())
        .filter(|&i| digits.contains(&images.labels[i]))
        .collect();
    let mut source_rows: Vec<usize> = (0..images.len())
        .filter(|&i| !digits.contains(&images.labels[i]))
        .collect();
    if source_rows.is_empty() {
        return Err(Error::InvalidInput(
            "no images outside the target digits; the source domain would be empty".into(),
        ));
    }
    subsample(&mut target_rows, config.max_target, &mut rng.derive(2));
    subsample(&mut source_rows, config.max_source, &mut rng.derive(3));

    let mut phi = Vec::with_capacity(target_rows.len());
    for &i in &target_rows {
        let d = images.labels[i];
        let s = stats[if d == digits[0] { 0 } else { 1 }];
        phi.push(compute_phi(&[intensities[i]], d, digits, s, config)?[0]);
    }

    let mut r = rng.derive(4);
    let mut treatments = Vec::with_capacity(phi.len());
    let mut outcomes = Vec::with_capacity(phi.len());
    let mut mu0 = Vec::with_capacity(phi.len());
    let mut mu1 = Vec::with_capacity(phi.len());
    for &p in &phi {
        let t = if r.random::<f64>() < propensity(p) { 1.0 } else { 0.0 };
        let eps = standard_normal(&mut r);
        treatments.push(t);
        outcomes.push(outcome_mean(t, p) + eps);
        mu0.push(outcome_mean(0.0, p));
        mu1.push(outcome_mean(1.0, p));
    }

    let target = DomainDataset::target(pixel_matrix(images, &target_rows), treatments, outcomes)?
        .with_ground_truth(GroundTruth::from_potentials(mu0, mu1)?);
    let source = DomainDataset::source(pixel_matrix(images, &source_rows));
    let target_labels = target_rows.iter().map(|&i| images.labels[i]).collect();

    Ok(HcmnistDataset {
        target,
        source,
        phi,
        target_labels,
        digits,
        stats,
    })
}

fn subsample(rows: &mut Vec<usize>, cap: Option<usize>, rng: &mut RngStream) {
    if let Some(cap) = cap {
        if rows.len() > cap {
            let perm = permutation(rows.len(), rng);
            let mut picked: Vec<usize> = perm[..cap].iter().map(|&k| rows[k]).collect();
            picked.sort_unstable();
            *rows = picked;
        }
    }
}

fn pixel_matrix(images: &ImageSet, rows: &[usize]) -> Array2<f64> {
    let size = images.rows * images.cols;
    Array2::from_shape_fn((rows.len(), size), |(r, c)| {
        f64::from(images.image(rows[r])[c]) / 255.0
    })
}
