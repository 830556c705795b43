//! The five loss terms and their weighted total.
//!
//! ```text
//! l_y = -(1/n_t) sum_target [ t log N(y | mu1, sigma1^2) + (1-t) log N(y | mu0, sigma0^2) ]
//! l_t = -(1/n_t) sum_target [ t log p + (1-t) log(1-p) ]
//! l_d = -(1/n)   sum_all    [ D log D^ + (1-D) log(1-D^) ]
//! l_a =  (1/n)   sum_all    log(1 - D^)
//! l_r =  mean over all entries of (x^ - x)^2
//! total = a0 l_y + a1 l_t + a2 l_d + a3 l_a + a4 l_r
//! ```
//!
//! Probabilities are clipped to `[1e-12, 1 - 1e-12]` before every log. Rows
//! whose label mask is false are never read by the labeled terms.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::CombinedDataset;
use crate::error::{Error, Result};
use crate::network::{ForwardOutput, HeadGradients, OutcomeHead};

pub const PROB_CLIP: f64 = 1e-12;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Weights of the five terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub outcome: f64,
    pub propensity: f64,
    pub discriminator: f64,
    pub adversarial: f64,
    pub reconstruction: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::from_array([1.0; 5])
    }
}

impl LossWeights {
    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            outcome: a[0],
            propensity: a[1],
            discriminator: a[2],
            adversarial: a[3],
            reconstruction: a[4],
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.outcome,
            self.propensity,
            self.discriminator,
            self.adversarial,
            self.reconstruction,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in ["outcome", "propensity", "discriminator", "adversarial", "reconstruction"]
            .iter()
            .zip(self.as_array())
        {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "loss weight `{name}` must be finite and non-negative, got {a}"
                )));
            }
        }
        Ok(())
    }

    /// Only the discriminator term, as used by the discriminator phase.
    pub fn discriminator_phase(&self) -> Self {
        Self::from_array([0.0, 0.0, self.discriminator, 0.0, 0.0])
    }

    /// Everything except the discriminator term.
    pub fn main_phase(&self) -> Self {
        Self {
            discriminator: 0.0,
            ..*self
        }
    }
}

/// Unweighted term values plus the normalizers they used.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub l_y: f64,
    pub l_t: f64,
    pub l_d: f64,
    pub l_a: f64,
    pub l_r: f64,
    pub n_t: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_y: f64,
    pub l_t: f64,
    pub l_d: f64,
    pub l_a: f64,
    pub l_r: f64,
    pub total: f64,
    pub n_t: usize,
    pub n: usize,
}

pub fn total_loss(terms: &LossTerms, weights: &LossWeights) -> LossBreakdown {
    let a = weights.as_array();
    let total = a[0] * terms.l_y + a[1] * terms.l_t + a[2] * terms.l_d + a[3] * terms.l_a + a[4] * terms.l_r;
    LossBreakdown {
        l_y: terms.l_y,
        l_t: terms.l_t,
        l_d: terms.l_d,
        l_a: terms.l_a,
        l_r: terms.l_r,
        total,
        n_t: terms.n_t,
        n: terms.n,
    }
}

#[inline]
fn clip_prob(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

/// Derivative of the clip; zero where the probability saturates.
#[inline]
fn clip_active(p: f64) -> f64 {
    if (PROB_CLIP..=1.0 - PROB_CLIP).contains(&p) {
        1.0
    } else {
        0.0
    }
}

fn count_labeled(mask: &[bool]) -> Result<usize> {
    match mask.iter().filter(|&&m| m).count() {
        0 => Err(Error::InvalidInput("no labeled target rows in the batch".into())),
        n => Ok(n),
    }
}

fn same_len(what: &str, n: usize, lens: &[usize]) -> Result<()> {
    if lens.iter().all(|&l| l == n) {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what}: inputs have lengths {lens:?}, expected {n}")))
    }
}

/// Gaussian negative log-likelihood of the factual head.
pub fn outcome_loss(
    y: &[f64],
    t: &[f64],
    mu0: &[f64],
    mu1: &[f64],
    sigma0: &[f64],
    sigma1: &[f64],
    mask: &[bool],
) -> Result<f64> {
    let n = mask.len();
    same_len("outcome_loss", n, &[y.len(), t.len(), mu0.len(), mu1.len(), sigma0.len(), sigma1.len()])?;
    let n_t = count_labeled(mask)?;
    let mut acc = 0.0;
    for i in (0..n).filter(|&i| mask[i]) {
        let (mu, s) = if t[i] == 1.0 { (mu1[i], sigma1[i]) } else { (mu0[i], sigma0[i]) };
        let r = (y[i] - mu) / s;
        acc += HALF_LN_2PI + s.ln() + 0.5 * r * r;
    }
    Ok(acc / n_t as f64)
}

/// Squared error of the factual head, for point-estimate outcome heads.
pub fn outcome_mse(y: &[f64], t: &[f64], mu0: &[f64], mu1: &[f64], mask: &[bool]) -> Result<f64> {
    let n = mask.len();
    same_len("outcome_mse", n, &[y.len(), t.len(), mu0.len(), mu1.len()])?;
    let n_t = count_labeled(mask)?;
    let mut acc = 0.0;
    for i in (0..n).filter(|&i| mask[i]) {
        let mu = if t[i] == 1.0 { mu1[i] } else { mu0[i] };
        acc += (y[i] - mu).powi(2);
    }
    Ok(acc / n_t as f64)
}

pub fn propensity_loss(t: &[f64], propensity: &[f64], mask: &[bool]) -> Result<f64> {
    same_len("propensity_loss", mask.len(), &[t.len(), propensity.len()])?;
    let n_t = count_labeled(mask)?;
    let mut acc = 0.0;
    for i in (0..mask.len()).filter(|&i| mask[i]) {
        let p = clip_prob(propensity[i]);
        acc += t[i] * p.ln() + (1.0 - t[i]) * (1.0 - p).ln();
    }
    Ok(-acc / n_t as f64)
}

pub fn discriminator_loss(d_flags: &[f64], disc_prob: &[f64]) -> Result<f64> {
    same_len("discriminator_loss", d_flags.len(), &[disc_prob.len()])?;
    if d_flags.is_empty() {
        return Err(Error::InvalidInput("discriminator_loss on an empty batch".into()));
    }
    let acc: f64 = d_flags
        .iter()
        .zip(disc_prob)
        .map(|(&d, &p)| {
            let p = clip_prob(p);
            d * p.ln() + (1.0 - d) * (1.0 - p).ln()
        })
        .sum();
    Ok(-acc / d_flags.len() as f64)
}

pub fn adversarial_loss(disc_prob: &[f64]) -> Result<f64> {
    if disc_prob.is_empty() {
        return Err(Error::InvalidInput("adversarial_loss on an empty batch".into()));
    }
    let acc: f64 = disc_prob.iter().map(|&p| (1.0 - clip_prob(p)).ln()).sum();
    Ok(acc / disc_prob.len() as f64)
}

pub fn reconstruction_loss(x: ArrayView2<'_, f64>, x_hat: ArrayView2<'_, f64>) -> Result<f64> {
    if x.dim() != x_hat.dim() {
        return Err(Error::Shape(format!(
            "reconstruction_loss: input {:?} vs reconstruction {:?}",
            x.dim(),
            x_hat.dim()
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidInput("reconstruction_loss on an empty batch".into()));
    }
    let acc: f64 = x.iter().zip(x_hat.iter()).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(acc / x.len() as f64)
}

/// Labels and covariates of one batch, aligned with a forward pass.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    pub covariates: ArrayView2<'a, f64>,
    /// Only read where `label_mask` is true.
    pub treatments: &'a [f64],
    /// Only read where `label_mask` is true.
    pub outcomes: &'a [f64],
    pub label_mask: &'a [bool],
    pub domain_flags: &'a [f64],
}

impl<'a> LossInputs<'a> {
    pub fn from_combined(data: &'a CombinedDataset) -> Self {
        Self {
            covariates: data.covariates.view(),
            treatments: data.treatment_storage(),
            outcomes: data.outcome_storage(),
            label_mask: data.label_mask(),
            domain_flags: data.domain_flags(),
        }
    }
}

/// All five terms for a batch. Terms whose head is disabled are zero.
pub fn evaluate(out: &ForwardOutput, inputs: &LossInputs<'_>, head: OutcomeHead) -> Result<LossTerms> {
    let s = |a: &Array1<f64>| a.as_slice().expect("contiguous").to_vec();
    let (mu0, mu1) = (s(&out.mu0), s(&out.mu1));
    let l_y = match head {
        OutcomeHead::Gaussian => outcome_loss(
            inputs.outcomes,
            inputs.treatments,
            &mu0,
            &mu1,
            &s(&out.sigma0),
            &s(&out.sigma1),
            inputs.label_mask,
        )?,
        OutcomeHead::Point => outcome_mse(inputs.outcomes, inputs.treatments, &mu0, &mu1, inputs.label_mask)?,
    };
    let l_t = propensity_loss(inputs.treatments, &s(&out.propensity), inputs.label_mask)?;
    let (l_d, l_a) = match &out.disc_prob {
        Some(p) => {
            let p = s(p);
            (discriminator_loss(inputs.domain_flags, &p)?, adversarial_loss(&p)?)
        }
        None => (0.0, 0.0),
    };
    let l_r = match &out.reconstruction {
        Some(r) => reconstruction_loss(inputs.covariates, r.view())?,
        None => 0.0,
    };
    Ok(LossTerms {
        l_y,
        l_t,
        l_d,
        l_a,
        l_r,
        n_t: count_labeled(inputs.label_mask)?,
        n: inputs.label_mask.len(),
    })
}

/// Gradient of the weighted total with respect to every head output.
/// Terms with zero weight contribute nothing, and the discriminator and
/// decoder entries are `None` when neither of their terms is active.
pub fn head_gradients(
    out: &ForwardOutput,
    inputs: &LossInputs<'_>,
    weights: &LossWeights,
    head: OutcomeHead,
) -> Result<HeadGradients> {
    let n = out.n_rows();
    same_len(
        "head_gradients",
        n,
        &[
            inputs.treatments.len(),
            inputs.outcomes.len(),
            inputs.label_mask.len(),
            inputs.domain_flags.len(),
            inputs.covariates.nrows(),
        ],
    )?;
    let mut g = HeadGradients::zeros(n);
    let mask = inputs.label_mask;

    if weights.outcome != 0.0 || weights.propensity != 0.0 {
        let n_t = count_labeled(mask)? as f64;
        let wy = weights.outcome / n_t;
        let wt = weights.propensity / n_t;
        for i in (0..n).filter(|&i| mask[i]) {
            let t = inputs.treatments[i];
            let y = inputs.outcomes[i];
            if wy != 0.0 {
                let treated = t == 1.0;
                let mu = if treated { out.mu1[i] } else { out.mu0[i] };
                let (d_mu, d_sigma) = match head {
                    OutcomeHead::Gaussian => {
                        let s = if treated { out.sigma1[i] } else { out.sigma0[i] };
                        let r = y - mu;
                        (-r / (s * s), 1.0 / s - r * r / (s * s * s))
                    }
                    OutcomeHead::Point => (-2.0 * (y - mu), 0.0),
                };
                if treated {
                    g.mu1[i] = wy * d_mu;
                    g.sigma1[i] = wy * d_sigma;
                } else {
                    g.mu0[i] = wy * d_mu;
                    g.sigma0[i] = wy * d_sigma;
                }
            }
            if wt != 0.0 {
                let p = out.propensity[i];
                g.propensity_logit[i] = wt * (p - t) * clip_active(p);
            }
        }
    }

    if let Some(prob) = &out.disc_prob {
        if weights.discriminator != 0.0 || weights.adversarial != 0.0 {
            let wd = weights.discriminator / n as f64;
            let wa = weights.adversarial / n as f64;
            let d = Array1::from_shape_fn(n, |i| {
                let p = prob[i];
                let active = clip_active(p);
                let bce = (p - inputs.domain_flags[i]) * active;
                // d/dlogit log(1 - sigmoid(l)) = -sigmoid(l)
                let adv = -p * active;
                wd * bce + wa * adv
            });
            g.disc_logit = Some(d);
        }
    }

    if let Some(rec) = &out.reconstruction {
        if weights.reconstruction != 0.0 {
            let scale = 2.0 * weights.reconstruction / rec.len() as f64;
            let mut d: Array2<f64> = rec - &inputs.covariates;
            d *= scale;
            g.reconstruction = Some(d);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn outcome_loss_at_the_mode() {
        let y = [0.3, -1.2, 2.0];
        let t = [1.0, 0.0, 1.0];
        let l = outcome_loss(&y, &t, &y, &y, &[1.0; 3], &[1.0; 3], &[true; 3]).unwrap();
        assert!((l - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn outcome_loss_single_row() {
        let l = outcome_loss(&[0.0], &[1.0], &[7.0], &[1.0], &[1.0], &[1.0], &[true]).unwrap();
        assert!((l - (HALF_LN_2PI + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn counterfactual_head_is_ignored() {
        let base = outcome_loss(&[1.0], &[1.0], &[0.0], &[0.5], &[1.0], &[2.0], &[true]).unwrap();
        let moved = outcome_loss(&[1.0], &[1.0], &[99.0], &[0.5], &[3.0], &[2.0], &[true]).unwrap();
        assert_eq!(base, moved);
    }

    #[test]
    fn empty_target_is_an_error() {
        assert!(outcome_loss(&[0.0], &[1.0], &[0.0], &[0.0], &[1.0], &[1.0], &[false]).is_err());
    }

    #[test]
    fn propensity_cases() {
        let half = propensity_loss(&[1.0, 0.0], &[0.5, 0.5], &[true, true]).unwrap();
        assert!((half - LN2).abs() < 1e-15);
        let hand = propensity_loss(&[1.0, 0.0], &[0.8, 0.6], &[true, true]).unwrap();
        assert!((hand - -0.5 * (0.8f64.ln() + 0.4f64.ln())).abs() < 1e-15);
        let perfect = propensity_loss(&[1.0, 0.0], &[1.0, 0.0], &[true, true]).unwrap();
        assert!(perfect >= 0.0 && perfect < 1e-11);
    }

    #[test]
    fn discriminator_cases() {
        let half = discriminator_loss(&[1.0, 0.0, 0.0], &[0.5; 3]).unwrap();
        assert!((half - LN2).abs() < 1e-15);
        let hand = discriminator_loss(&[1.0, 0.0], &[0.9, 0.2]).unwrap();
        assert!((hand - -0.5 * (0.9f64.ln() + 0.8f64.ln())).abs() < 1e-15);
        assert!(discriminator_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap() < 1e-11);
    }

    #[test]
    fn adversarial_cases() {
        assert_eq!(adversarial_loss(&[0.0, 0.0]).unwrap(), (1.0 - PROB_CLIP).ln());
        assert!((adversarial_loss(&[0.5; 4]).unwrap() - -LN2).abs() < 1e-15);
        let hand = adversarial_loss(&[0.2, 0.8]).unwrap();
        assert!((hand - 0.5 * (0.8f64.ln() + 0.2f64.ln())).abs() < 1e-15);
        assert!(adversarial_loss(&[1.0]).unwrap().is_finite());
    }

    #[test]
    fn reconstruction_cases() {
        let x = ndarray::array![[0.0, 1.0]];
        let xh = ndarray::array![[1.0, 1.0]];
        assert_eq!(reconstruction_loss(x.view(), xh.view()).unwrap(), 0.5);
        assert_eq!(reconstruction_loss(x.view(), x.view()).unwrap(), 0.0);
        let shifted = &x + 0.25;
        assert!((reconstruction_loss(x.view(), shifted.view()).unwrap() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn total_composition() {
        let terms = LossTerms {
            l_y: 1.0,
            l_t: 2.0,
            l_d: 3.0,
            l_a: -1.0,
            l_r: 0.5,
            n_t: 1,
            n: 2,
        };
        // 1 + 2 + 3 - 1 + 0.5
        assert_eq!(total_loss(&terms, &LossWeights::default()).total, 5.5);
        assert_eq!(total_loss(&terms, &LossWeights::from_array([0.0; 5])).total, 0.0);
        let only_y = LossWeights::from_array([1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(total_loss(&terms, &only_y).total, 1.0);
    }

    #[test]
    fn phase_weights_split_the_objective() {
        let w = LossWeights::from_array([1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(w.discriminator_phase().as_array(), [0.0, 0.0, 3.0, 0.0, 0.0]);
        assert_eq!(w.main_phase().as_array(), [1.0, 2.0, 0.0, 4.0, 5.0]);
        assert!(LossWeights::from_array([1.0, -1.0, 0.0, 0.0, 0.0]).validate().is_err());
    }
}
