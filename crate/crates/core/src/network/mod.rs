//! Multi-head feedforward network.
//!
//! ```text
//!                 +-> propensity head g  -> logit        -> sigmoid     -> P(T=1|x)
//!                 +-> outcome head 0     -> (mu0, s0)    -> softplus+floor -> sigma0
//! x -> encoder f -+-> outcome head 1     -> (mu1, s1)    -> softplus+floor -> sigma1
//!        (z)      +-> discriminator d    -> logit        -> sigmoid     -> P(D=1|x)
//!                 +-> decoder r          -> x_hat (linear output)
//! ```
//!
//! Every hidden layer is `activation(h W + b)` followed by inverted dropout
//! (kept units are scaled by `1 / (1 - p)`); head output layers are linear.
//! The encoder's last layer produces the representation `z`. The decoder's
//! hidden widths mirror the encoder's in reverse.

mod backward;
mod checkpoint;
mod forward;

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::RngStream;

pub use backward::{backward, BackwardScope, HeadGradients};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use forward::{forward, DropoutMode, DropoutMasks, ForwardOutput, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `x` for `x > 0`, `e^x - 1` otherwise.
    #[default]
    Elu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Outcome head parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeHead {
    /// Emits a mean and a scale; trained by Gaussian negative log-likelihood.
    #[default]
    Gaussian,
    /// Emits a mean only; sigma is reported as 1.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub shared_widths: Vec<usize>,
    pub head_widths: Vec<usize>,
    pub dropout_rate: f64,
    pub discriminator_enabled: bool,
    pub reconstruction_enabled: bool,
    pub sigma_floor: f64,
    pub activation: Activation,
    pub outcome_head: OutcomeHead,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_dim: 0,
            shared_widths: vec![200, 200, 200],
            head_widths: vec![100, 100],
            dropout_rate: 0.1,
            discriminator_enabled: true,
            reconstruction_enabled: true,
            sigma_floor: 1e-3,
            activation: Activation::Elu,
            outcome_head: OutcomeHead::Gaussian,
        }
    }
}

impl NetworkConfig {
    pub fn with_input_dim(mut self, input_dim: usize) -> Self {
        self.input_dim = input_dim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.input_dim == 0 {
            return bad("input_dim must be positive".into());
        }
        if self.shared_widths.is_empty() {
            return bad("the encoder needs at least one layer".into());
        }
        if self.shared_widths.iter().chain(&self.head_widths).any(|&w| w == 0) {
            return bad("layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        if !(self.sigma_floor > 0.0) {
            return bad(format!("sigma_floor must be positive, got {}", self.sigma_floor));
        }
        Ok(())
    }

    pub fn representation_dim(&self) -> usize {
        *self.shared_widths.last().expect("validated")
    }

    fn outcome_outputs(&self) -> usize {
        match self.outcome_head {
            OutcomeHead::Gaussian => 2,
            OutcomeHead::Point => 1,
        }
    }

    fn decoder_hidden(&self) -> Vec<usize> {
        let n = self.shared_widths.len();
        self.shared_widths[..n - 1].iter().rev().copied().collect()
    }
}

/// Network components, in the fixed order used for initialization and
/// dropout-mask sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Encoder,
    Propensity,
    Outcome0,
    Outcome1,
    Discriminator,
    Decoder,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Encoder,
        Component::Propensity,
        Component::Outcome0,
        Component::Outcome1,
        Component::Discriminator,
        Component::Decoder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Encoder => "encoder",
            Component::Propensity => "propensity",
            Component::Outcome0 => "outcome0",
            Component::Outcome1 => "outcome1",
            Component::Discriminator => "discriminator",
            Component::Decoder => "decoder",
        }
    }

    fn stream_id(self) -> u64 {
        self as u64 + 1
    }
}

/// Scale on the He init of each head's final linear layer. Full-scale output
/// weights put some initial pre-sigma values far below zero, the Gaussian
/// NLL starts in the thousands and training under dropout never settles.
pub const HEAD_OUTPUT_GAIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in x fan_out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    /// He-normal weights, `N(0, gain^2 * 2 / fan_in)`, and zero biases.
    fn he(fan_in: usize, fan_out: usize, gain: f64, rng: &mut RngStream) -> Self {
        let normal = Normal::new(0.0, gain * (2.0 / fan_in as f64).sqrt()).expect("positive scale");
        Self {
            weight: Array2::from_shape_simple_fn((fan_in, fan_out), || normal.sample(rng)),
            bias: Array1::zeros(fan_out),
        }
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    fn build(widths: &[usize], mut make: impl FnMut(usize, usize) -> Dense) -> Self {
        Self {
            layers: widths.windows(2).map(|w| make(w[0], w[1])).collect(),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weight.nrows(), l.weight.ncols()))
                .collect(),
        }
    }
}

/// All trainable weights. Disabled heads are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub config: NetworkConfig,
    pub encoder: Mlp,
    pub propensity: Mlp,
    pub outcome0: Mlp,
    pub outcome1: Mlp,
    pub discriminator: Option<Mlp>,
    pub decoder: Option<Mlp>,
}

/// Gradients share the parameter layout.
pub type Gradients = Parameters;

fn layer_widths(config: &NetworkConfig, component: Component) -> Vec<usize> {
    let z = config.representation_dim();
    let head = |out: usize| {
        let mut w = vec![z];
        w.extend(&config.head_widths);
        w.push(out);
        w
    };
    match component {
        Component::Encoder => {
            let mut w = vec![config.input_dim];
            w.extend(&config.shared_widths);
            w
        }
        Component::Propensity | Component::Discriminator => head(1),
        Component::Outcome0 | Component::Outcome1 => head(config.outcome_outputs()),
        Component::Decoder => {
            let mut w = vec![z];
            w.extend(config.decoder_hidden());
            w.push(config.input_dim);
            w
        }
    }
}

impl Parameters {
    /// Fresh weights. Each component draws from its own child stream of
    /// `rng`, so toggling a head never changes the others' initial values.
    pub fn init(config: &NetworkConfig, rng: &RngStream) -> Result<Self> {
        config.validate()?;
        let build = |c: Component| {
            let mut r = rng.derive(c.stream_id());
            let widths = layer_widths(config, c);
            let last = widths.len() - 2;
            let mut k = 0;
            Mlp::build(&widths, |i, o| {
                let gain = if c != Component::Encoder && k == last { HEAD_OUTPUT_GAIN } else { 1.0 };
                k += 1;
                Dense::he(i, o, gain, &mut r)
            })
        };
        Ok(Self::assemble(config, build))
    }

    /// All-zero weights of the right shapes.
    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::assemble(config, |c| {
            Mlp::build(&layer_widths(config, c), Dense::zeros)
        }))
    }

    fn assemble(config: &NetworkConfig, mut build: impl FnMut(Component) -> Mlp) -> Self {
        Self {
            config: config.clone(),
            encoder: build(Component::Encoder),
            propensity: build(Component::Propensity),
            outcome0: build(Component::Outcome0),
            outcome1: build(Component::Outcome1),
            discriminator: config
                .discriminator_enabled
                .then(|| build(Component::Discriminator)),
            decoder: config.reconstruction_enabled.then(|| build(Component::Decoder)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            encoder: self.encoder.zeros_like(),
            propensity: self.propensity.zeros_like(),
            outcome0: self.outcome0.zeros_like(),
            outcome1: self.outcome1.zeros_like(),
            discriminator: self.discriminator.as_ref().map(Mlp::zeros_like),
            decoder: self.decoder.as_ref().map(Mlp::zeros_like),
        }
    }

    pub fn component(&self, c: Component) -> Option<&Mlp> {
        match c {
            Component::Encoder => Some(&self.encoder),
            Component::Propensity => Some(&self.propensity),
            Component::Outcome0 => Some(&self.outcome0),
            Component::Outcome1 => Some(&self.outcome1),
            Component::Discriminator => self.discriminator.as_ref(),
            Component::Decoder => self.decoder.as_ref(),
        }
    }

    pub fn component_mut(&mut self, c: Component) -> Option<&mut Mlp> {
        match c {
            Component::Encoder => Some(&mut self.encoder),
            Component::Propensity => Some(&mut self.propensity),
            Component::Outcome0 => Some(&mut self.outcome0),
            Component::Outcome1 => Some(&mut self.outcome1),
            Component::Discriminator => self.discriminator.as_mut(),
            Component::Decoder => self.decoder.as_mut(),
        }
    }

    /// Present components in canonical order.
    pub fn components(&self) -> impl Iterator<Item = (Component, &Mlp)> {
        Component::ALL
            .into_iter()
            .filter_map(move |c| self.component(c).map(|m| (c, m)))
    }

    /// Flat views of every weight and bias tensor, in canonical order,
    /// restricted to `filter`.
    pub fn tensors_mut(&mut self, filter: impl Fn(Component) -> bool) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        let Parameters {
            encoder,
            propensity,
            outcome0,
            outcome1,
            discriminator,
            decoder,
            ..
        } = self;
        let parts = [
            (Component::Encoder, Some(encoder)),
            (Component::Propensity, Some(propensity)),
            (Component::Outcome0, Some(outcome0)),
            (Component::Outcome1, Some(outcome1)),
            (Component::Discriminator, discriminator.as_mut()),
            (Component::Decoder, decoder.as_mut()),
        ];
        for (c, mlp) in parts {
            let Some(mlp) = mlp else { continue };
            if !filter(c) {
                continue;
            }
            for layer in &mut mlp.layers {
                out.push(layer.weight.as_slice_mut().expect("standard layout"));
                out.push(layer.bias.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    /// Read-only counterpart of [`Parameters::tensors_mut`].
    pub fn tensors(&self, filter: impl Fn(Component) -> bool) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for (_, mlp) in self.components().filter(|(c, _)| filter(*c)) {
            for layer in &mlp.layers {
                out.push(layer.weight.as_slice().expect("standard layout"));
                out.push(layer.bias.as_slice().expect("standard layout"));
            }
        }
        out
    }

    /// Named flat tensors in canonical order.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (c, mlp) in self.components() {
            for (i, layer) in mlp.layers.iter().enumerate() {
                out.push((
                    format!("{}.{i}.weight", c.name()),
                    layer.weight.shape().to_vec(),
                    layer.weight.as_slice().expect("standard layout"),
                ));
                out.push((
                    format!("{}.{i}.bias", c.name()),
                    layer.bias.shape().to_vec(),
                    layer.bias.as_slice().expect("standard layout"),
                ));
            }
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, _, v)| v.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, _, v)| v.iter().all(|x| x.is_finite()))
    }
}
