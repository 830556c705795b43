//! Cross-fitted augmented inverse-probability weighting.
//!
//! ```text
//! tau = (1/n) sum_i [ mu1(x_i) - mu0(x_i)
//!                     + t_i (y_i - mu1(x_i)) / e(x_i)
//!                     - (1 - t_i) (y_i - mu0(x_i)) / (1 - e(x_i)) ]
//! ```
//!
//! `e` is clipped to `[clip, 1 - clip]`. Nuisances for each fold are fitted
//! on the remaining folds after standardizing features with those folds'
//! moments.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::linear::{fit_logistic, fit_ridge};
use crate::error::{Error, Result};
use crate::estimation::AteEstimate;
use crate::numeric::sampling::permutation;
use crate::numeric::RngStream;

pub const MIN_ROWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AipwConfig {
    pub folds: usize,
    pub ridge_penalty: f64,
    pub logistic_penalty: f64,
    pub propensity_clip: f64,
}

impl Default for AipwConfig {
    fn default() -> Self {
        Self {
            folds: 2,
            ridge_penalty: 1.0,
            logistic_penalty: 1.0,
            propensity_clip: 0.01,
        }
    }
}

/// The AIPW formula for given nuisance values.
pub fn aipw_from_nuisances(t: &[f64], y: &[f64], e: &[f64], mu0: &[f64], mu1: &[f64], clip: f64) -> Result<f64> {
    let n = t.len();
    if [y.len(), e.len(), mu0.len(), mu1.len()].iter().any(|&l| l != n) {
        return Err(Error::Shape("AIPW inputs must share one length".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("AIPW on zero rows".into()));
    }
    let mut acc = 0.0;
    for i in 0..n {
        let e = e[i].clamp(clip, 1.0 - clip);
        acc += mu1[i] - mu0[i] + t[i] * (y[i] - mu1[i]) / e - (1.0 - t[i]) * (y[i] - mu0[i]) / (1.0 - e);
    }
    Ok(acc / n as f64)
}

fn standardizer(x: ArrayView2<'_, f64>) -> (Array1<f64>, Array1<f64>) {
    let m = x.mean_axis(Axis(0)).expect("rows present");
    let sd = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
    (m, sd)
}

pub fn aipw_estimate(
    x: ArrayView2<'_, f64>,
    t: &[f64],
    y: &[f64],
    config: &AipwConfig,
    rng: &mut RngStream,
) -> Result<AteEstimate> {
    let n = x.nrows();
    if t.len() != n || y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} treatments and {} outcomes", t.len(), y.len())));
    }
    let treated = t.iter().filter(|&&v| v == 1.0).count();
    if treated == 0 {
        return Err(Error::SingleArm("all control"));
    }
    if treated == n {
        return Err(Error::SingleArm("all treated"));
    }
    if n < MIN_ROWS {
        return Err(Error::InvalidInput(format!("AIPW needs at least {MIN_ROWS} rows, got {n}")));
    }
    if config.folds < 2 || config.folds > n {
        return Err(Error::InvalidConfig(format!("folds must lie in [2, {n}], got {}", config.folds)));
    }

    let perm = permutation(n, rng);
    let k = config.folds;
    let mut e = vec![0.0; n];
    let mut mu0 = vec![0.0; n];
    let mut mu1 = vec![0.0; n];
    for f in 0..k {
        let held: Vec<usize> = perm[f * n / k..(f + 1) * n / k].to_vec();
        let fit_rows: Vec<usize> = perm
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < f * n / k || *i >= (f + 1) * n / k)
            .map(|(_, &r)| r)
            .collect();

        let x_fit = x.select(Axis(0), &fit_rows);
        let (m, sd) = standardizer(x_fit.view());
        let z_fit = (&x_fit - &m) / &sd;
        let z_held = (&x.select(Axis(0), &held) - &m) / &sd;
        let t_fit = Array1::from_iter(fit_rows.iter().map(|&r| t[r]));

        let prop = fit_logistic(z_fit.view(), t_fit.view(), config.logistic_penalty)?;
        let e_held = prop.predict_proba(z_held.view());

        let arm = |value: f64| -> Result<Array1<f64>> {
            let rows: Vec<usize> = (0..fit_rows.len()).filter(|&i| t_fit[i] == value).collect();
            if rows.is_empty() {
                return Err(Error::SingleArm(if value == 1.0 {
                    "a cross-fitting fold has no treated rows"
                } else {
                    "a cross-fitting fold has no control rows"
                }));
            }
            let z_arm: Array2<f64> = z_fit.select(Axis(0), &rows);
            let y_arm = Array1::from_iter(rows.iter().map(|&i| y[fit_rows[i]]));
            Ok(fit_ridge(z_arm.view(), y_arm.view(), config.ridge_penalty)?.decision(z_held.view()))
        };
        let m0 = arm(0.0)?;
        let m1 = arm(1.0)?;
        for (j, &r) in held.iter().enumerate() {
            e[r] = e_held[j];
            mu0[r] = m0[j];
            mu1[r] = m1[j];
        }
    }

    let tau = aipw_from_nuisances(t, y, &e, &mu0, &mu1, config.propensity_clip)?;
    Ok(AteEstimate {
        tau_hat: tau,
        mu0_sd: vec![0.0; n],
        mu1_sd: vec![0.0; n],
        mu0_hat: mu0,
        mu1_hat: mu1,
        mc_passes: 1,
    })
}
