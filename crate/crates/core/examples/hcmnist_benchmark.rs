//! Builds an HCMNIST target/source pair and compares the full model with
//! its Bayesian-Dragonnet reduction.
//!
//! cargo run --example hcmnist_benchmark -- [MNIST_DIR]
//!
//! Without a directory a small synthetic image set stands in for MNIST.

use batle::baselines::{fit_preset, make_preset};
use batle::data::{generate_hcmnist, load_mnist_dir, HcmnistConfig, ImageSet};
use batle::experiment::match_ratio;
use batle::network::NetworkConfig;
use batle::numeric::RngStream;
use batle::training::TrainConfig;
use rand::Rng;

fn synthetic_images(n: usize) -> ImageSet {
    let mut r = RngStream::new(1);
    let (rows, cols) = (8, 8);
    let mut pixels = Vec::with_capacity(n * rows * cols);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let digit = (i % 10) as u8;
        let ink: f64 = 0.2 + 0.05 * f64::from(digit) + 0.1 * r.random::<f64>();
        for _ in 0..rows * cols {
            pixels.push(if r.random::<f64>() < ink { r.random_range(128..=255) } else { 0 });
        }
        labels.push(digit);
    }
    ImageSet { rows, cols, pixels, labels }
}

fn main() -> batle::Result<()> {
    let images = match std::env::args().nth(1) {
        Some(dir) => load_mnist_dir(dir.as_ref())?,
        None => synthetic_images(3000),
    };
    let cfg = HcmnistConfig {
        target_digits: Some([2, 7]),
        max_target: Some(800),
        max_source: Some(3200),
        ..HcmnistConfig::default()
    };
    let root = RngStream::new(3);
    let h = generate_hcmnist(&images, &cfg, &root.derive(1))?;
    println!(
        "digits {:?}: target {} rows, source {} rows, {} features",
        h.digits,
        h.target.n_rows(),
        h.source.n_rows(),
        h.target.n_features()
    );

    let (target, source) = match_ratio(&h.target, &h.source, 0.25, &mut root.derive(2))?;
    let tau = target.ground_truth.as_ref().unwrap().true_ate;
    let net = NetworkConfig {
        shared_widths: vec![64, 32],
        head_widths: vec![32],
        ..NetworkConfig::default()
    };
    let train = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    for name in ["causal_batle", "bayesian_dragonnet"] {
        let fit = fit_preset(&make_preset(name, &net)?, &train, &target, Some(&source), true, &root.derive(3))?;
        let est = fit.estimate.tau_hat;
        println!("{name:<20} tau={tau:.4} tau_hat={est:.4} mae={:.4}", (est - tau).abs());
    }
    Ok(())
}
