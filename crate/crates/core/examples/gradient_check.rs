//! Compares backpropagated gradients with central differences on a tiny
//! network, term by term.

use batle::data::{combine_domains, DomainDataset};
use batle::losses::{evaluate, head_gradients, total_loss, LossInputs, LossWeights};
use batle::network::{backward, forward, BackwardScope, DropoutMode, NetworkConfig, Parameters};
use batle::numeric::RngStream;
use ndarray::{s, Array2};
use rand::Rng;

fn main() -> batle::Result<()> {
    let mut r = RngStream::new(5);
    let cfg = NetworkConfig {
        input_dim: 4,
        shared_widths: vec![6, 5],
        head_widths: vec![4],
        dropout_rate: 0.2,
        ..NetworkConfig::default()
    };
    let params = Parameters::init(&cfg, &r.derive(1))?;
    let x = Array2::from_shape_simple_fn((8, 4), || r.random::<f64>() * 2.0 - 1.0);
    let target = DomainDataset::target(
        x.slice(s![..5, ..]).to_owned(),
        vec![1.0, 0.0, 1.0, 0.0, 1.0],
        vec![0.4, -0.2, 1.1, 0.0, 0.7],
    )?;
    let data = combine_domains(&target, &DomainDataset::source(x.slice(s![5.., ..]).to_owned()))?;
    let inputs = LossInputs::from_combined(&data);
    let masks = forward(&params, data.covariates.view(), DropoutMode::Sampled(&mut r.derive(2)))?.masks();

    let loss = |p: &Parameters, w: &LossWeights| -> batle::Result<f64> {
        let out = forward(p, data.covariates.view(), DropoutMode::Fixed(&masks))?.output;
        Ok(total_loss(&evaluate(&out, &inputs, cfg.outcome_head)?, w).total)
    };

    let names = ["l_y", "l_t", "l_d", "l_a", "l_r"];
    for (k, name) in names.iter().enumerate() {
        let mut a = [0.0; 5];
        a[k] = 1.0;
        let w = LossWeights::from_array(a);
        let tape = forward(&params, data.covariates.view(), DropoutMode::Fixed(&masks))?;
        let up = head_gradients(&tape.output, &inputs, &w, cfg.outcome_head)?;
        let grads = backward(&params, &tape, &up, BackwardScope::All)?;

        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let g = grads.tensors(|_| true);
        for i in 0..g.len() {
            for j in 0..g[i].len() {
                let mut plus = params.clone();
                plus.tensors_mut(|_| true)[i][j] += h;
                let mut minus = params.clone();
                minus.tensors_mut(|_| true)[i][j] -= h;
                let fd = (loss(&plus, &w)? - loss(&minus, &w)?) / (2.0 * h);
                worst = worst.max((g[i][j] - fd).abs() / g[i][j].abs().max(fd.abs()).max(1e-6));
            }
        }
        println!("{name}: max relative error {worst:.2e} over {} parameters", params.num_parameters());
    }
    Ok(())
}
