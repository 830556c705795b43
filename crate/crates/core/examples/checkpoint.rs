//! Saves trained weights to JSON, reloads them and checks the predictions
//! match bit for bit.

use batle::data::{combine_domains, DomainDataset};
use batle::estimation::predict_point;
use batle::network::{load_checkpoint, save_checkpoint, NetworkConfig};
use batle::numeric::RngStream;
use batle::training::{train, TrainConfig};
use ndarray::{s, Array2};
use rand::Rng;

fn main() -> batle::Result<()> {
    let mut r = RngStream::new(4);
    let x = Array2::from_shape_simple_fn((200, 3), || r.random::<f64>());
    let t: Vec<f64> = (0..80).map(|i| (i % 2) as f64).collect();
    let y: Vec<f64> = (0..80).map(|i| x[[i, 0]] + t[i]).collect();
    let target = DomainDataset::target(x.slice(s![..80, ..]).to_owned(), t, y)?;
    let data = combine_domains(&target, &DomainDataset::source(x.slice(s![80.., ..]).to_owned()))?;
    let net = NetworkConfig {
        shared_widths: vec![16],
        head_widths: vec![8],
        ..NetworkConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let (params, _) = train(&cfg, &net, &data, &r.derive(1))?;

    let dir = tempfile::tempdir().map_err(|e| batle::Error::InvalidInput(e.to_string()))?;
    let path = dir.path().join("weights.json");
    save_checkpoint(&path, &params)?;
    let back = load_checkpoint(&path)?;
    let a = predict_point(&params, target.covariates.view())?;
    let b = predict_point(&back, target.covariates.view())?;
    println!(
        "{} parameters, {} bytes on disk, predictions identical: {}",
        params.num_parameters(),
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0),
        a.mu0 == b.mu0 && a.mu1 == b.mu1
    );
    Ok(())
}
