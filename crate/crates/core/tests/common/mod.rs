#![allow(dead_code)]

use batle::data::{combine_domains, CombinedDataset, DomainDataset};
use batle::losses::{evaluate, head_gradients, total_loss, LossInputs, LossWeights};
use batle::network::{backward, forward, BackwardScope, DropoutMasks, DropoutMode, NetworkConfig, OutcomeHead, Parameters};
use batle::numeric::RngStream;
use ndarray::Array2;
use rand::Rng;

/// A small random network and batch for gradient checks.
pub struct GradCase {
    pub params: Parameters,
    pub data: CombinedDataset,
    pub masks: DropoutMasks,
}

pub fn random_case(seed: u64) -> GradCase {
    let mut r = RngStream::new(seed);
    let v = r.random_range(2..=8);
    let shared: Vec<usize> = (0..r.random_range(1..=2)).map(|_| r.random_range(1..=6)).collect();
    let heads: Vec<usize> = (0..r.random_range(0..=2)).map(|_| r.random_range(1..=6)).collect();
    let n = r.random_range(4..=8);
    let n_t = r.random_range(2..n);
    let cfg = NetworkConfig {
        input_dim: v,
        shared_widths: shared,
        head_widths: heads,
        dropout_rate: if r.random::<bool>() { 0.3 } else { 0.0 },
        outcome_head: if r.random_range(0..4) == 0 { OutcomeHead::Point } else { OutcomeHead::Gaussian },
        ..NetworkConfig::default()
    };
    let mut params = Parameters::init(&cfg, &r.derive(1)).unwrap();
    // Zero biases put fully dropped units exactly on the ELU kink at 0, where
    // central differences lose an order of accuracy. Tensors alternate
    // weight, bias.
    for bias in params.tensors_mut(|_| true).into_iter().skip(1).step_by(2) {
        for b in bias.iter_mut() {
            *b = r.random::<f64>() - 0.5;
        }
    }
    let x = Array2::from_shape_simple_fn((n, v), || r.random::<f64>() * 2.0 - 1.0);
    let t: Vec<f64> = (0..n_t).map(|i| (i % 2) as f64).collect();
    let y: Vec<f64> = (0..n_t).map(|_| r.random::<f64>() * 3.0 - 1.5).collect();
    let target = DomainDataset::target(x.slice(ndarray::s![..n_t, ..]).to_owned(), t, y).unwrap();
    let source = DomainDataset::source(x.slice(ndarray::s![n_t.., ..]).to_owned());
    let data = combine_domains(&target, &source).unwrap();
    let masks = forward(&params, data.covariates.view(), DropoutMode::Sampled(&mut r.derive(2)))
        .unwrap()
        .masks();
    GradCase { params, data, masks }
}

pub fn loss_at(case: &GradCase, params: &Parameters, weights: &LossWeights) -> f64 {
    let inputs = LossInputs::from_combined(&case.data);
    let tape = forward(params, case.data.covariates.view(), DropoutMode::Fixed(&case.masks)).unwrap();
    let terms = evaluate(&tape.output, &inputs, params.config.outcome_head).unwrap();
    total_loss(&terms, weights).total
}

pub fn analytic(case: &GradCase, weights: &LossWeights) -> Parameters {
    let inputs = LossInputs::from_combined(&case.data);
    let tape = forward(&case.params, case.data.covariates.view(), DropoutMode::Fixed(&case.masks)).unwrap();
    let up = head_gradients(&tape.output, &inputs, weights, case.params.config.outcome_head).unwrap();
    backward(&case.params, &tape, &up, BackwardScope::All).unwrap()
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter.
///
/// Rounding in the loss puts an absolute noise of roughly `1e-16 |L| / h` on
/// each difference, so entries smaller than `floor * max(1, |L|)` are scaled
/// by that amount instead of their own magnitude.
pub fn max_relative_error(case: &GradCase, weights: &LossWeights, h: f64, floor: f64) -> f64 {
    let grads = analytic(case, weights);
    let floor = floor * loss_at(case, &case.params, weights).abs().max(1.0);
    let g = grads.tensors(|_| true);
    let mut worst: f64 = 0.0;
    for k in 0..g.len() {
        for j in 0..g[k].len() {
            let mut plus = case.params.clone();
            plus.tensors_mut(|_| true)[k][j] += h;
            let mut minus = case.params.clone();
            minus.tensors_mut(|_| true)[k][j] -= h;
            let fd = (loss_at(case, &plus, weights) - loss_at(case, &minus, weights)) / (2.0 * h);
            let a = g[k][j];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    worst
}

pub fn one_hot_weights(k: usize) -> LossWeights {
    let mut a = [0.0; 5];
    a[k] = 1.0;
    LossWeights::from_array(a)
}
