//! Model presets sharing one backbone, the network fitting pipeline, and
//! the AIPW baseline.
//!
//! | preset               | transfer heads | a2, a3, a4 | outcome heads | prediction        |
//! |----------------------|----------------|------------|---------------|-------------------|
//! | `causal_batle`       | on             | as given   | Gaussian      | 30 MC-dropout     |
//! | `bayesian_dragonnet` | off            | 0          | Gaussian      | 30 MC-dropout     |
//! | `dragonnet`          | off            | 0          | point, MSE    | 1 pass, dropout off |

mod aipw;
pub mod linear;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{combine_domains, CombinedDataset, DomainDataset};
use crate::error::{Error, Result};
use crate::estimation::{predict_mc_dropout, predict_point, AteEstimate, McPrediction, DEFAULT_MC_PASSES};
use crate::network::{NetworkConfig, OutcomeHead, Parameters};
use crate::numeric::kernels::{mean, sample_sd};
use crate::numeric::RngStream;
use crate::training::{train, TrainConfig, TrainHistory};

pub use aipw::{aipw_estimate, aipw_from_nuisances, AipwConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CausalBatle,
    BayesianDragonnet,
    Dragonnet,
    Aipw,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::CausalBatle, Method::BayesianDragonnet, Method::Dragonnet, Method::Aipw];

    pub fn name(self) -> &'static str {
        match self {
            Method::CausalBatle => "causal_batle",
            Method::BayesianDragonnet => "bayesian_dragonnet",
            Method::Dragonnet => "dragonnet",
            Method::Aipw => "aipw",
        }
    }

    /// Only the full model sees source rows.
    pub fn uses_source(self) -> bool {
        self == Method::CausalBatle
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::InvalidConfig(format!("unknown method `{s}`; valid methods: {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPreset {
    pub method: Method,
    pub network: NetworkConfig,
    /// Forces the discriminator, adversarial and reconstruction weights to 0.
    pub zero_transfer_weights: bool,
    pub mc_passes: usize,
    /// False means prediction runs once with dropout off.
    pub mc_dropout: bool,
}

pub fn make_preset(name: &str, base: &NetworkConfig) -> Result<ModelPreset> {
    let method: Method = name.parse()?;
    let bare = NetworkConfig {
        discriminator_enabled: false,
        reconstruction_enabled: false,
        ..base.clone()
    };
    Ok(match method {
        Method::CausalBatle => ModelPreset {
            method,
            network: base.clone(),
            zero_transfer_weights: false,
            mc_passes: DEFAULT_MC_PASSES,
            mc_dropout: true,
        },
        Method::BayesianDragonnet => ModelPreset {
            method,
            network: bare,
            zero_transfer_weights: true,
            mc_passes: DEFAULT_MC_PASSES,
            mc_dropout: true,
        },
        Method::Dragonnet => ModelPreset {
            method,
            network: NetworkConfig {
                outcome_head: OutcomeHead::Point,
                ..bare
            },
            zero_transfer_weights: true,
            mc_passes: 1,
            mc_dropout: false,
        },
        Method::Aipw => {
            return Err(Error::InvalidConfig(
                "`aipw` is not a network preset; valid presets: causal_batle, bayesian_dragonnet, dragonnet".into(),
            ))
        }
    })
}

impl ModelPreset {
    pub fn train_config(&self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        if self.zero_transfer_weights {
            cfg.weights.discriminator = 0.0;
            cfg.weights.adversarial = 0.0;
            cfg.weights.reconstruction = 0.0;
        }
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub params: Parameters,
    pub history: TrainHistory,
    pub estimate: AteEstimate,
    /// Affine map applied to outcomes before training: `(y - shift) / scale`.
    pub outcome_shift: f64,
    pub outcome_scale: f64,
}

/// Trains `preset` on `target` (plus `source` when the preset uses it) and
/// estimates the ATE over the target covariates.
///
/// With `standardize_outcome`, outcomes are standardized with the target
/// mean and standard deviation for training and predictions are mapped
/// back. Streams derived from `rng`: 1 training, 2 MC-dropout.
pub fn fit_preset(
    preset: &ModelPreset,
    train_config: &TrainConfig,
    target: &DomainDataset,
    source: Option<&DomainDataset>,
    standardize_outcome: bool,
    rng: &RngStream,
) -> Result<FittedModel> {
    let y = target
        .outcomes()
        .ok_or_else(|| Error::InvalidInput("the target domain must be labeled".into()))?;
    let (shift, scale) = if standardize_outcome {
        let sd = sample_sd(y);
        (mean(y), if sd > 0.0 { sd } else { 1.0 })
    } else {
        (0.0, 1.0)
    };
    let scaled_target = DomainDataset::target(
        target.covariates.clone(),
        target.treatments().expect("labeled").to_vec(),
        y.iter().map(|v| (v - shift) / scale).collect(),
    )?;
    let data: CombinedDataset = match source {
        Some(s) if preset.method.uses_source() => combine_domains(&scaled_target, s)?,
        _ => CombinedDataset::target_only(&scaled_target)?,
    };

    let cfg = preset.train_config(train_config);
    let (params, history) = train(&cfg, &preset.network, &data, &rng.derive(1))?;

    let x = target.covariates.view();
    let pred = if preset.mc_dropout {
        predict_mc_dropout(&params, x, preset.mc_passes, &mut rng.derive(2))?
    } else {
        predict_point(&params, x)?
    };
    let pred = McPrediction {
        mu0: pred.mu0.mapv(|m| shift + scale * m),
        mu1: pred.mu1.mapv(|m| shift + scale * m),
        mu0_sd: pred.mu0_sd * scale,
        mu1_sd: pred.mu1_sd * scale,
        passes: pred.passes,
    };
    Ok(FittedModel {
        params,
        history,
        estimate: AteEstimate::from_prediction(&pred)?,
        outcome_shift: shift,
        outcome_scale: scale,
    })
}
