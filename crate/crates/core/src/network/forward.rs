use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::{Activation, Component, Mlp, OutcomeHead, Parameters};
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, softplus, RngStream};

/// How dropout is applied on a forward pass.
pub enum DropoutMode<'a> {
    Off,
    /// Fresh Bernoulli masks drawn from the stream.
    Sampled(&'a mut RngStream),
    /// Replays masks recorded by an earlier pass.
    Fixed(&'a DropoutMasks),
}

/// Inverted-dropout masks per component and hidden layer. Entries are
/// `0` or `1 / (1 - p)`; `None` means the layer was left untouched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropoutMasks {
    layers: [Vec<Option<Array2<f64>>>; 6],
}

impl DropoutMasks {
    pub fn get(&self, c: Component, layer: usize) -> Option<&Array2<f64>> {
        self.layers[c as usize].get(layer).and_then(Option::as_ref)
    }

    pub fn is_empty(&self) -> bool {
        self.layers.iter().flatten().all(Option::is_none)
    }
}

/// Per-row head outputs for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `z`, as consumed by the heads (after dropout).
    pub representation: Array2<f64>,
    pub propensity_logit: Array1<f64>,
    pub propensity: Array1<f64>,
    pub mu0: Array1<f64>,
    pub sigma0: Array1<f64>,
    pub mu1: Array1<f64>,
    pub sigma1: Array1<f64>,
    pub disc_logit: Option<Array1<f64>>,
    pub disc_prob: Option<Array1<f64>>,
    pub reconstruction: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub(super) struct MlpTape {
    /// Input of every layer.
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activation of every hidden layer.
    pub pre: Vec<Array2<f64>>,
    pub masks: Vec<Option<Array2<f64>>>,
    pub output: Array2<f64>,
}

/// Everything a backward pass needs from the forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    pub(super) encoder: MlpTape,
    pub(super) heads: [Option<MlpTape>; 5],
    pub output: ForwardOutput,
}

impl Tape {
    pub fn output(&self) -> &ForwardOutput {
        &self.output
    }

    pub fn masks(&self) -> DropoutMasks {
        let mut masks = DropoutMasks::default();
        masks.layers[0] = self.encoder.masks.clone();
        for (k, head) in self.heads.iter().enumerate() {
            if let Some(h) = head {
                masks.layers[k + 1] = h.masks.clone();
            }
        }
        masks
    }

    pub(super) fn head(&self, c: Component) -> Option<&MlpTape> {
        self.heads[c as usize - 1].as_ref()
    }

    /// Re-evaluates only the discriminator head on the stored representation,
    /// replaying its dropout masks. Used after the discriminator's weights
    /// change while the encoder's do not.
    pub fn refresh_discriminator(&mut self, params: &Parameters) -> Result<()> {
        let (Some(mlp), Some(old)) = (
            params.discriminator.as_ref(),
            self.heads[Component::Discriminator as usize - 1].as_ref(),
        ) else {
            return Ok(());
        };
        let masks = old.masks.clone();
        let mut source = MaskSource::Replay(&masks);
        let tape = run_mlp(
            mlp,
            self.output.representation.clone(),
            mlp.layers.len() - 1,
            params.config.activation,
            params.config.dropout_rate,
            &mut source,
            Component::Discriminator,
        )?;
        let logit = tape.output.column(0).to_owned();
        self.output.disc_prob = Some(logit.mapv(sigmoid));
        self.output.disc_logit = Some(logit);
        self.heads[Component::Discriminator as usize - 1] = Some(tape);
        Ok(())
    }
}

enum MaskSource<'a, 'r> {
    Off,
    Sample(&'r mut RngStream),
    Replay(&'a [Option<Array2<f64>>]),
}

impl MaskSource<'_, '_> {
    fn mask(&mut self, layer: usize, shape: (usize, usize), rate: f64) -> Option<Array2<f64>> {
        match self {
            MaskSource::Off => None,
            MaskSource::Sample(rng) => {
                if rate == 0.0 {
                    return None;
                }
                let keep = 1.0 / (1.0 - rate);
                Some(Array2::from_shape_simple_fn(shape, || {
                    if rng.random::<f64>() < rate {
                        0.0
                    } else {
                        keep
                    }
                }))
            }
            MaskSource::Replay(masks) => masks.get(layer).cloned().flatten(),
        }
    }
}

fn run_mlp(
    mlp: &Mlp,
    input: Array2<f64>,
    hidden: usize,
    activation: Activation,
    rate: f64,
    source: &mut MaskSource<'_, '_>,
    component: Component,
) -> Result<MlpTape> {
    let mut inputs = Vec::with_capacity(mlp.layers.len());
    let mut pre = Vec::with_capacity(hidden);
    let mut masks = Vec::with_capacity(hidden);
    let mut h = input;
    for (l, layer) in mlp.layers.iter().enumerate() {
        let mut a = h.dot(&layer.weight);
        a += &layer.bias;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                block: component.name(),
                layer: l,
            });
        }
        inputs.push(h);
        if l < hidden {
            let mut out = a.mapv(|v| activation.apply(v));
            let mask = source.mask(l, out.dim(), rate);
            if let Some(m) = &mask {
                if m.dim() != out.dim() {
                    return Err(Error::Shape(format!(
                        "{} layer {l}: dropout mask {:?} does not match activations {:?}",
                        component.name(),
                        m.dim(),
                        out.dim()
                    )));
                }
                out *= m;
            }
            pre.push(a);
            masks.push(mask);
            h = out;
        } else {
            h = a;
        }
    }
    Ok(MlpTape {
        inputs,
        pre,
        masks,
        output: h,
    })
}

fn mask_source<'a, 'r>(
    fixed: Option<&'a DropoutMasks>,
    rng: Option<&'r mut RngStream>,
    c: Component,
) -> MaskSource<'a, 'r> {
    match (fixed, rng) {
        (Some(m), _) => MaskSource::Replay(&m.layers[c as usize]),
        (None, Some(r)) => MaskSource::Sample(r),
        (None, None) => MaskSource::Off,
    }
}

/// Evaluates every enabled head on `batch`.
pub fn forward(params: &Parameters, batch: ArrayView2<'_, f64>, mode: DropoutMode<'_>) -> Result<Tape> {
    let cfg = &params.config;
    if batch.ncols() != cfg.input_dim {
        return Err(Error::Shape(format!(
            "batch has {} columns, network expects {}",
            batch.ncols(),
            cfg.input_dim
        )));
    }
    let rate = cfg.dropout_rate;
    let act = cfg.activation;

    let (fixed, mut rng) = match mode {
        DropoutMode::Off => (None, None),
        DropoutMode::Sampled(r) => (None, Some(r)),
        DropoutMode::Fixed(m) => (Some(m), None),
    };

    let enc_layers = params.encoder.layers.len();
    let encoder = run_mlp(
        &params.encoder,
        batch.to_owned(),
        enc_layers,
        act,
        rate,
        &mut mask_source(fixed, rng.as_deref_mut(), Component::Encoder),
        Component::Encoder,
    )?;
    let z = encoder.output.clone();

    let mut heads: [Option<MlpTape>; 5] = Default::default();
    for c in &Component::ALL[1..] {
        if let Some(mlp) = params.component(*c) {
            let tape = run_mlp(
                mlp,
                z.clone(),
                mlp.layers.len() - 1,
                act,
                rate,
                &mut mask_source(fixed, rng.as_deref_mut(), *c),
                *c,
            )?;
            heads[*c as usize - 1] = Some(tape);
        }
    }

    let head_out = |c: Component| &heads[c as usize - 1].as_ref().expect("always present").output;
    let propensity_logit = head_out(Component::Propensity).column(0).to_owned();
    let outcome = |c: Component| -> (Array1<f64>, Array1<f64>) {
        let out = head_out(c);
        let mu = out.column(0).to_owned();
        let sigma = match cfg.outcome_head {
            OutcomeHead::Gaussian => out.column(1).mapv(|s| softplus(s) + cfg.sigma_floor),
            OutcomeHead::Point => Array1::ones(out.nrows()),
        };
        (mu, sigma)
    };
    let (mu0, sigma0) = outcome(Component::Outcome0);
    let (mu1, sigma1) = outcome(Component::Outcome1);
    let disc_logit = heads[Component::Discriminator as usize - 1]
        .as_ref()
        .map(|t| t.output.column(0).to_owned());
    let reconstruction = heads[Component::Decoder as usize - 1]
        .as_ref()
        .map(|t| t.output.clone());

    let output = ForwardOutput {
        representation: z,
        propensity: propensity_logit.mapv(sigmoid),
        propensity_logit,
        mu0,
        sigma0,
        mu1,
        sigma1,
        disc_prob: disc_logit.as_ref().map(|l| l.mapv(sigmoid)),
        disc_logit,
        reconstruction,
    };
    Ok(Tape {
        encoder,
        heads,
        output,
    })
}

impl ForwardOutput {
    pub fn n_rows(&self) -> usize {
        self.mu0.len()
    }

    /// Rows `rows` of every per-row field.
    pub fn select_rows(&self, rows: &[usize]) -> ForwardOutput {
        let pick = |a: &Array1<f64>| a.select(Axis(0), rows);
        ForwardOutput {
            representation: self.representation.select(Axis(0), rows),
            propensity_logit: pick(&self.propensity_logit),
            propensity: pick(&self.propensity),
            mu0: pick(&self.mu0),
            sigma0: pick(&self.sigma0),
            mu1: pick(&self.mu1),
            sigma1: pick(&self.sigma1),
            disc_logit: self.disc_logit.as_ref().map(pick),
            disc_prob: self.disc_prob.as_ref().map(pick),
            reconstruction: self.reconstruction.as_ref().map(|r| r.select(Axis(0), rows)),
        }
    }
}
