use serde::{Deserialize, Serialize};

use crate::network::{Component, Gradients, Parameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments plus a step count per component, so components
/// updated in different phases keep independent bias corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Parameters,
    v: Parameters,
    steps: [u64; 6],
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            steps: [0; 6],
        }
    }

    pub fn steps(&self, c: Component) -> u64 {
        self.steps[c as usize]
    }
}

/// One bias-corrected Adam update of the components selected by `filter`.
/// Unselected components are left bitwise untouched.
pub fn adam_step(
    params: &mut Parameters,
    grads: &Gradients,
    state: &mut AdamState,
    config: &AdamConfig,
    filter: impl Fn(Component) -> bool + Copy,
) {
    let AdamConfig {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
    } = *config;
    for c in Component::ALL {
        if !filter(c) || params.component(c).is_none() {
            continue;
        }
        state.steps[c as usize] += 1;
        let t = state.steps[c as usize] as i32;
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        let only = move |x: Component| x == c;
        let p = params.tensors_mut(only);
        let g = grads.tensors(only);
        let m = state.m.tensors_mut(only);
        let v = state.v.tensors_mut(only);
        for (((p, g), m), v) in p.into_iter().zip(g).zip(m).zip(v) {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;
    use crate::numeric::RngStream;

    fn tiny() -> Parameters {
        let cfg = NetworkConfig {
            input_dim: 2,
            shared_widths: vec![3],
            head_widths: vec![2],
            ..NetworkConfig::default()
        };
        Parameters::init(&cfg, &RngStream::new(1)).unwrap()
    }

    #[test]
    fn zero_gradient_first_step_is_a_no_op() {
        let mut p = tiny();
        let before = p.clone();
        let g = p.zeros_like();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &AdamConfig::default(), |_| true);
        assert_eq!(p, before);
    }

    #[test]
    fn unit_gradient_moves_by_learning_rate() {
        let mut p = tiny();
        let before = p.encoder.layers[0].bias[0];
        let mut g = p.zeros_like();
        g.encoder.layers[0].bias[0] = 1.0;
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        adam_step(&mut p, &g, &mut s, &cfg, |_| true);
        let delta = (p.encoder.layers[0].bias[0] - before).abs();
        assert!((delta - 0.1 / (1.0 + 1e-8)).abs() < 1e-6);
    }

    #[test]
    fn repeated_gradient_does_not_grow_the_step() {
        let mut p = tiny();
        let mut g = p.zeros_like();
        g.propensity.layers[0].weight[[0, 0]] = 0.3;
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig::default();
        let w0 = p.propensity.layers[0].weight[[0, 0]];
        adam_step(&mut p, &g, &mut s, &cfg, |_| true);
        let w1 = p.propensity.layers[0].weight[[0, 0]];
        adam_step(&mut p, &g, &mut s, &cfg, |_| true);
        let w2 = p.propensity.layers[0].weight[[0, 0]];
        assert!((w2 - w1).abs() <= (w1 - w0).abs() + 1e-15);
    }

    #[test]
    fn filter_isolates_components() {
        let mut p = tiny();
        let before = p.clone();
        let mut g = p.zeros_like();
        for t in g.tensors_mut(|_| true) {
            t.fill(0.5);
        }
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &AdamConfig::default(), |c| c == Component::Discriminator);
        assert_eq!(p.encoder, before.encoder);
        assert_ne!(p.discriminator, before.discriminator);
        assert_eq!(s.steps(Component::Encoder), 0);
    }
}
