//! Trains the full model directly with early stopping and prints the loss
//! history and MC-dropout uncertainty.

use batle::data::{combine_domains, DomainDataset};
use batle::estimation::{estimate_ate, predict_mc_dropout};
use batle::network::NetworkConfig;
use batle::numeric::sampling::standard_normal;
use batle::numeric::{sigmoid, RngStream};
use batle::training::{train, TrainConfig};
use ndarray::{s, Array2};
use rand::Rng;

fn main() -> batle::Result<()> {
    let mut r = RngStream::new(11);
    let (n_t, n_s, v) = (300, 1200, 8);
    let x = Array2::from_shape_simple_fn((n_t + n_s, v), || standard_normal(&mut r));
    let t: Vec<f64> = (0..n_t)
        .map(|i| if r.random::<f64>() < sigmoid(x[[i, 0]]) { 1.0 } else { 0.0 })
        .collect();
    let y: Vec<f64> = (0..n_t)
        .map(|i| 1.0 * t[i] + x[[i, 0]] - 0.5 * x[[i, 3]] + 0.3 * standard_normal(&mut r))
        .collect();
    let target = DomainDataset::target(x.slice(s![..n_t, ..]).to_owned(), t, y)?;
    let source = DomainDataset::source(x.slice(s![n_t.., ..]).to_owned());
    let data = combine_domains(&target, &source)?;

    let cfg = TrainConfig {
        epochs: 80,
        early_stop_patience: Some(15),
        ..TrainConfig::default()
    };
    let net = NetworkConfig {
        shared_widths: vec![64, 64],
        head_widths: vec![32],
        ..NetworkConfig::default()
    };
    let (params, history) = train(&cfg, &net, &data, &r.derive(1))?;
    for (epoch, b) in history.train.iter().enumerate().step_by(10) {
        println!(
            "epoch {:>3}  total {:>8.4}  l_y {:>7.4}  l_t {:.4}  l_d {:.4}  l_r {:.4}",
            epoch + 1,
            b.total,
            b.l_y,
            b.l_t,
            b.l_d,
            b.l_r
        );
    }
    println!("best epoch {} (stopped early: {})", history.best_epoch, history.stopped_early);

    let pred = predict_mc_dropout(&params, target.covariates.view(), 30, &mut r.derive(2))?;
    let est = estimate_ate(pred.mu0.as_slice().unwrap(), pred.mu1.as_slice().unwrap())?;
    let spread = pred.mu1_sd.mean().unwrap();
    println!("tau_hat {:.4} (true 1.0), mean MC sd of mu1 {spread:.4}", est.tau_hat);
    Ok(())
}
