//! Mini-batch training.
//!
//! In the default [`AdversarialMode::Alternating`] mode every batch runs two
//! phases on one sampled-dropout forward pass:
//!
//! 1. discriminator phase: only `d` moves, along `a2 * l_d`;
//! 2. main phase: everything except `d` moves, along
//!    `a0 l_y + a1 l_t + a3 l_a + a4 l_r`. The adversarial gradient reaches
//!    the encoder through the frozen discriminator.
//!
//! [`AdversarialMode::Joint`] instead takes one step on the full weighted sum
//! for every parameter.

mod adam;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::CombinedDataset;
use crate::error::{Error, Result};
use crate::losses::{evaluate, head_gradients, total_loss, LossBreakdown, LossInputs, LossWeights};
use crate::network::{backward, forward, BackwardScope, Component, DropoutMode, NetworkConfig, Parameters, Tape};
use crate::numeric::sampling::permutation;
use crate::numeric::RngStream;

pub use adam::{adam_step, AdamConfig, AdamState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AdversarialMode {
    #[default]
    Alternating,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub disc_steps: usize,
    /// Stop after this many epochs without validation improvement.
    pub early_stop_patience: Option<usize>,
    /// Share of target rows held out when early stopping is on.
    pub validation_fraction: f64,
    pub adversarial_mode: AdversarialMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            weights: LossWeights::default(),
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            epochs: 200,
            batch_size: 64,
            disc_steps: 1,
            early_stop_patience: None,
            validation_fraction: 0.1,
            adversarial_mode: AdversarialMode::Alternating,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.weights.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("beta1 and beta2 must lie in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if self.early_stop_patience == Some(0) {
            return bad("early_stop_patience must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Per-epoch mean of the batch breakdowns, plus validation records when
/// early stopping is on.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train: Vec<LossBreakdown>,
    pub validation: Vec<LossBreakdown>,
    /// Epoch (1-based) whose parameters were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,l_y,l_t,l_d,l_a,l_r,total";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for (k, b) in self.train.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{},{},{},{}", k + 1, b.l_y, b.l_t, b.l_d, b.l_a, b.l_r, b.total);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Optimizer state around a set of parameters.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    params: Parameters,
    adam: AdamState,
}

impl Trainer {
    pub fn new(config: TrainConfig, params: Parameters) -> Result<Self> {
        config.validate()?;
        let adam = AdamState::new(&params);
        Ok(Self { config, params, adam })
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn into_params(self) -> Parameters {
        self.params
    }

    fn uses_discriminator(&self) -> bool {
        self.params.discriminator.is_some() && self.config.weights.discriminator != 0.0
    }

    /// Updates only the discriminator along `a2 * l_d`, then re-evaluates the
    /// discriminator head in `tape`.
    pub fn discriminator_step(&mut self, tape: &mut Tape, inputs: &LossInputs<'_>) -> Result<()> {
        let head = self.params.config.outcome_head;
        let w = self.config.weights.discriminator_phase();
        let up = head_gradients(&tape.output, inputs, &w, head)?;
        let g = backward(&self.params, tape, &up, BackwardScope::DiscriminatorOnly)?;
        adam_step(&mut self.params, &g, &mut self.adam, &self.config.adam(), |c| {
            c == Component::Discriminator
        });
        tape.refresh_discriminator(&self.params)
    }

    /// Updates everything except the discriminator along the remaining
    /// terms. Returns the full weighted breakdown at the pre-update outputs.
    pub fn main_step(&mut self, tape: &Tape, inputs: &LossInputs<'_>) -> Result<LossBreakdown> {
        let head = self.params.config.outcome_head;
        let breakdown = total_loss(&evaluate(&tape.output, inputs, head)?, &self.config.weights);
        let w = self.config.weights.main_phase();
        let up = head_gradients(&tape.output, inputs, &w, head)?;
        let g = backward(&self.params, tape, &up, BackwardScope::All)?;
        adam_step(&mut self.params, &g, &mut self.adam, &self.config.adam(), |c| {
            c != Component::Discriminator
        });
        Ok(breakdown)
    }

    /// One step on the full weighted objective for every parameter.
    pub fn joint_step(&mut self, tape: &Tape, inputs: &LossInputs<'_>) -> Result<LossBreakdown> {
        let head = self.params.config.outcome_head;
        let breakdown = total_loss(&evaluate(&tape.output, inputs, head)?, &self.config.weights);
        let up = head_gradients(&tape.output, inputs, &self.config.weights, head)?;
        let g = backward(&self.params, tape, &up, BackwardScope::All)?;
        adam_step(&mut self.params, &g, &mut self.adam, &self.config.adam(), |_| true);
        Ok(breakdown)
    }

    pub fn train_batch(&mut self, batch: &CombinedDataset, dropout: &mut RngStream) -> Result<LossBreakdown> {
        let mut tape = forward(&self.params, batch.covariates.view(), DropoutMode::Sampled(dropout))?;
        let inputs = LossInputs::from_combined(batch);
        match self.config.adversarial_mode {
            AdversarialMode::Alternating => {
                if self.uses_discriminator() {
                    for _ in 0..self.config.disc_steps {
                        self.discriminator_step(&mut tape, &inputs)?;
                    }
                }
                self.main_step(&tape, &inputs)
            }
            AdversarialMode::Joint => self.joint_step(&tape, &inputs),
        }
    }
}

/// Splits row indices into batches that each carry a proportional share of
/// target and source rows. Every batch has at least one target row.
pub fn stratified_batches(
    target_rows: &[usize],
    source_rows: &[usize],
    batch_size: usize,
    rng: &mut RngStream,
) -> Vec<Vec<usize>> {
    let n_t = target_rows.len();
    let n_s = source_rows.len();
    let nb = (n_t + n_s).div_ceil(batch_size).min(n_t).max(1);
    let t_perm = permutation(n_t, rng);
    let s_perm = permutation(n_s, rng);
    (0..nb)
        .map(|k| {
            let mut b: Vec<usize> = t_perm[k * n_t / nb..(k + 1) * n_t / nb]
                .iter()
                .map(|&i| target_rows[i])
                .collect();
            b.extend(s_perm[k * n_s / nb..(k + 1) * n_s / nb].iter().map(|&i| source_rows[i]));
            b
        })
        .collect()
}

fn check_arms(data: &CombinedDataset) -> Result<()> {
    let (t, _) = data.target_labels();
    let treated = t.iter().filter(|&&v| v == 1.0).count();
    if treated == 0 {
        return Err(Error::SingleArm("all control"));
    }
    if treated == t.len() {
        return Err(Error::SingleArm("all treated"));
    }
    Ok(())
}

fn mean_breakdown(parts: &[LossBreakdown]) -> LossBreakdown {
    let k = parts.len() as f64;
    let mut m = LossBreakdown::default();
    for b in parts {
        m.l_y += b.l_y / k;
        m.l_t += b.l_t / k;
        m.l_d += b.l_d / k;
        m.l_a += b.l_a / k;
        m.l_r += b.l_r / k;
        m.total += b.total / k;
        m.n_t += b.n_t;
        m.n += b.n;
    }
    m
}

fn finite(b: &LossBreakdown) -> bool {
    [b.l_y, b.l_t, b.l_d, b.l_a, b.l_r, b.total].iter().all(|v| v.is_finite())
}

/// Trains a fresh network on `data`. `net_config.input_dim` of 0 is taken
/// from the data.
///
/// Streams derived from `rng`: 1 initial weights, 2 validation split,
/// 3 batch order, 4 dropout masks.
pub fn train(
    config: &TrainConfig,
    net_config: &NetworkConfig,
    data: &CombinedDataset,
    rng: &RngStream,
) -> Result<(Parameters, TrainHistory)> {
    config.validate()?;
    let mut net_config = net_config.clone();
    if net_config.input_dim == 0 {
        net_config.input_dim = data.n_features();
    } else if net_config.input_dim != data.n_features() {
        return Err(Error::Shape(format!(
            "network expects {} features, data has {}",
            net_config.input_dim,
            data.n_features()
        )));
    }
    if data.n_target() == 0 {
        return Err(Error::InvalidInput("no labeled target rows to train on".into()));
    }
    check_arms(data)?;

    let params = Parameters::init(&net_config, &rng.derive(1))?;
    let mut trainer = Trainer::new(config.clone(), params)?;

    let mut target_rows: Vec<usize> = (0..data.n_target()).collect();
    // Source rows only reach the discriminator and decoder terms. Without
    // them they would change batch composition and nothing else.
    let w = &config.weights;
    let uses_source = (net_config.discriminator_enabled && (w.discriminator != 0.0 || w.adversarial != 0.0))
        || (net_config.reconstruction_enabled && w.reconstruction != 0.0);
    let source_rows: Vec<usize> = if uses_source {
        (data.n_target()..data.n_rows()).collect()
    } else {
        Vec::new()
    };
    let validation = match config.early_stop_patience {
        Some(_) => {
            let n_val = ((data.n_target() as f64 * config.validation_fraction).round() as usize)
                .clamp(1, data.n_target() - 1);
            let perm = permutation(data.n_target(), &mut rng.derive(2));
            let mut val: Vec<usize> = perm[..n_val].to_vec();
            val.sort_unstable();
            target_rows.retain(|r| val.binary_search(r).is_err());
            Some(data.select_rows(&val))
        }
        None => None,
    };

    let mut batch_rng = rng.derive(3);
    let mut dropout_rng = rng.derive(4);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, Parameters)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        let batches = stratified_batches(&target_rows, &source_rows, config.batch_size, &mut batch_rng);
        let mut parts = Vec::with_capacity(batches.len());
        for rows in &batches {
            let batch = data.select_rows(rows);
            let b = match trainer.train_batch(&batch, &mut dropout_rng) {
                Err(Error::NonFinite { .. }) => return Err(Error::Diverged { epoch }),
                other => other?,
            };
            if !finite(&b) {
                return Err(Error::Diverged { epoch });
            }
            parts.push(b);
        }
        history.train.push(mean_breakdown(&parts));
        history.best_epoch = epoch;

        if let (Some(val), Some(patience)) = (&validation, config.early_stop_patience) {
            let head = net_config.outcome_head;
            let tape = match forward(trainer.params(), val.covariates.view(), DropoutMode::Off) {
                Err(Error::NonFinite { .. }) => return Err(Error::Diverged { epoch }),
                other => other?,
            };
            let terms = evaluate(&tape.output, &LossInputs::from_combined(val), head)?;
            let b = total_loss(&terms, &config.weights);
            let score = config.weights.outcome * b.l_y + config.weights.propensity * b.l_t;
            history.validation.push(b);
            match &best {
                Some((s, _)) if score >= *s => {
                    since_best += 1;
                    if since_best >= patience {
                        history.stopped_early = true;
                        break;
                    }
                }
                _ => {
                    best = Some((score, trainer.params().clone()));
                    since_best = 0;
                }
            }
        }
    }

    let params = match best {
        Some((_, p)) => {
            history.best_epoch = history.validation.len() - since_best;
            p
        }
        None => trainer.into_params(),
    };
    Ok((params, history))
}
