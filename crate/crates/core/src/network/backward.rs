use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};

use super::forward::MlpTape;
use super::{Activation, Component, Gradients, Mlp, OutcomeHead, Parameters, Tape};
use crate::error::{Error, Result};
use crate::numeric::sigmoid;

/// Loss gradients with respect to the per-row head outputs. `sigma*` are
/// taken with respect to the reported scale, not its pre-activation.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub propensity_logit: Array1<f64>,
    pub mu0: Array1<f64>,
    pub sigma0: Array1<f64>,
    pub mu1: Array1<f64>,
    pub sigma1: Array1<f64>,
    pub disc_logit: Option<Array1<f64>>,
    pub reconstruction: Option<Array2<f64>>,
}

impl HeadGradients {
    pub fn zeros(n: usize) -> Self {
        Self {
            propensity_logit: Array1::zeros(n),
            mu0: Array1::zeros(n),
            sigma0: Array1::zeros(n),
            mu1: Array1::zeros(n),
            sigma1: Array1::zeros(n),
            disc_logit: None,
            reconstruction: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardScope {
    /// Every component, including the encoder.
    All,
    /// Only the discriminator's own weights; nothing flows into the encoder.
    DiscriminatorOnly,
}

/// Backpropagates `upstream` through the recorded pass. Components without
/// upstream signal get zero gradients.
pub fn backward(
    params: &Parameters,
    tape: &Tape,
    upstream: &HeadGradients,
    scope: BackwardScope,
) -> Result<Gradients> {
    let n = tape.output.n_rows();
    let check = |name: &str, len: usize| {
        if len == n {
            Ok(())
        } else {
            Err(Error::Shape(format!("upstream `{name}` has {len} rows, batch has {n}")))
        }
    };
    check("propensity_logit", upstream.propensity_logit.len())?;
    check("mu0", upstream.mu0.len())?;
    check("mu1", upstream.mu1.len())?;

    let cfg = &params.config;
    let act = cfg.activation;
    let mut grads = params.zeros_like();
    let mut dz = Array2::<f64>::zeros(tape.output.representation.dim());

    if let (Some(d_logit), Some(mlp), Some(t)) = (
        upstream.disc_logit.as_ref(),
        params.discriminator.as_ref(),
        tape.head(Component::Discriminator),
    ) {
        check("disc_logit", d_logit.len())?;
        let d_out = column(d_logit);
        let into = grads.discriminator.as_mut().expect("same layout");
        dz += &mlp_backward(mlp, t, d_out, act, into);
    }
    if scope == BackwardScope::DiscriminatorOnly {
        return Ok(grads);
    }

    let t = tape.head(Component::Propensity).expect("always present");
    dz += &mlp_backward(
        &params.propensity,
        t,
        column(&upstream.propensity_logit),
        act,
        &mut grads.propensity,
    );

    for (c, d_mu, d_sigma) in [
        (Component::Outcome0, &upstream.mu0, &upstream.sigma0),
        (Component::Outcome1, &upstream.mu1, &upstream.sigma1),
    ] {
        let t = tape.head(c).expect("always present");
        let d_out = match cfg.outcome_head {
            OutcomeHead::Gaussian => {
                check(c.name(), d_sigma.len())?;
                let pre = t.output.column(1);
                let mut d = Array2::zeros((n, 2));
                d.column_mut(0).assign(d_mu);
                // sigma = softplus(s) + floor, d sigma / d s = sigmoid(s)
                for i in 0..n {
                    d[[i, 1]] = d_sigma[i] * sigmoid(pre[i]);
                }
                d
            }
            OutcomeHead::Point => column(d_mu),
        };
        let mlp = params.component(c).expect("always present");
        let into = grads.component_mut(c).expect("always present");
        dz += &mlp_backward(mlp, t, d_out, act, into);
    }

    if let (Some(d_rec), Some(mlp), Some(t)) = (
        upstream.reconstruction.as_ref(),
        params.decoder.as_ref(),
        tape.head(Component::Decoder),
    ) {
        if d_rec.dim() != t.output.dim() {
            return Err(Error::Shape(format!(
                "upstream reconstruction {:?} does not match output {:?}",
                d_rec.dim(),
                t.output.dim()
            )));
        }
        let into = grads.decoder.as_mut().expect("same layout");
        dz += &mlp_backward(mlp, t, d_rec.clone(), act, into);
    }

    mlp_backward(&params.encoder, &tape.encoder, dz, act, &mut grads.encoder);
    Ok(grads)
}

fn column(v: &Array1<f64>) -> Array2<f64> {
    v.clone().insert_axis(Axis(1))
}

/// Writes weight gradients into `into` and returns the gradient with respect
/// to the MLP's input.
fn mlp_backward(
    mlp: &Mlp,
    tape: &MlpTape,
    d_out: Array2<f64>,
    act: Activation,
    into: &mut Mlp,
) -> Array2<f64> {
    let hidden = tape.pre.len();
    let mut delta = d_out;
    for l in (0..mlp.layers.len()).rev() {
        if l < hidden {
            if let Some(m) = &tape.masks[l] {
                delta *= m;
            }
            delta.zip_mut_with(&tape.pre[l], |d, &a| *d *= act.derivative(a));
        }
        let g = &mut into.layers[l];
        general_mat_mul(1.0, &tape.inputs[l].t(), &delta, 0.0, &mut g.weight);
        g.bias.assign(&delta.sum_axis(Axis(0)));
        delta = delta.dot(&mlp.layers[l].weight.t());
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward, DropoutMode, NetworkConfig};
    use crate::numeric::RngStream;

    fn setup() -> (Parameters, Array2<f64>) {
        let cfg = NetworkConfig {
            input_dim: 3,
            shared_widths: vec![4, 4],
            head_widths: vec![3],
            ..NetworkConfig::default()
        };
        let p = Parameters::init(&cfg, &RngStream::new(8)).unwrap();
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        (p, x)
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let (p, x) = setup();
        let tape = forward(&p, x.view(), DropoutMode::Off).unwrap();
        let g = backward(&p, &tape, &HeadGradients::zeros(5), BackwardScope::All).unwrap();
        assert!(g.named_tensors().iter().all(|(_, _, v)| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn discriminator_scope_leaves_encoder_untouched() {
        let (p, x) = setup();
        let tape = forward(&p, x.view(), DropoutMode::Off).unwrap();
        let mut up = HeadGradients::zeros(5);
        up.propensity_logit.fill(1.0);
        up.disc_logit = Some(Array1::ones(5));
        let g = backward(&p, &tape, &up, BackwardScope::DiscriminatorOnly).unwrap();
        assert!(g.encoder.layers.iter().all(|l| l.weight.iter().all(|&w| w == 0.0)));
        assert!(g.propensity.layers.iter().all(|l| l.weight.iter().all(|&w| w == 0.0)));
        let d = g.discriminator.unwrap();
        assert!(d.layers.last().unwrap().bias[0] == 5.0);
    }

    #[test]
    fn rows_mismatch_is_rejected() {
        let (p, x) = setup();
        let tape = forward(&p, x.view(), DropoutMode::Off).unwrap();
        assert!(backward(&p, &tape, &HeadGradients::zeros(4), BackwardScope::All).is_err());
    }
}
