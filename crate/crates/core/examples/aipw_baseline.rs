//! Cross-fitted AIPW on confounded data, next to the naive difference of
//! means.

use batle::baselines::{aipw_estimate, AipwConfig};
use batle::numeric::sampling::standard_normal;
use batle::numeric::{sigmoid, RngStream};
use ndarray::Array2;
use rand::Rng;

fn main() -> batle::Result<()> {
    let mut r = RngStream::new(2);
    let n = 1000;
    let x = Array2::from_shape_simple_fn((n, 5), || standard_normal(&mut r));
    let t: Vec<f64> = (0..n)
        .map(|i| if r.random::<f64>() < sigmoid(1.5 * x[[i, 0]]) { 1.0 } else { 0.0 })
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| 2.0 * t[i] + 3.0 * x[[i, 0]] + x[[i, 1]] + standard_normal(&mut r))
        .collect();

    let arm = |v: f64| {
        let ys: Vec<f64> = (0..n).filter(|&i| t[i] == v).map(|i| y[i]).collect();
        ys.iter().sum::<f64>() / ys.len() as f64
    };
    println!("difference of means {:.3}", arm(1.0) - arm(0.0));
    for folds in [2, 5] {
        let cfg = AipwConfig {
            folds,
            ..AipwConfig::default()
        };
        let est = aipw_estimate(x.view(), &t, &y, &cfg, &mut r.derive(folds as u64))?;
        println!("AIPW, {folds} folds     {:.3}  (true 2.0)", est.tau_hat);
    }
    Ok(())
}
