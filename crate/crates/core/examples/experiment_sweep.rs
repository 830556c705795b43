//! Runs a small ratio sweep through the experiment runner and prints the
//! aggregate table. Pass an output directory to keep the files.

use batle::baselines::Method;
use batle::data::GwasConfig;
use batle::experiment::{aggregate_csv, run_experiment, ExperimentConfig};
use batle::network::NetworkConfig;
use batle::training::TrainConfig;

fn main() -> batle::Result<()> {
    let keep = std::env::args().nth(1);
    let tmp = tempfile::tempdir().map_err(|e| batle::Error::InvalidInput(e.to_string()))?;
    let out = keep.as_deref().map(std::path::Path::new).unwrap_or(tmp.path());

    let cfg = ExperimentConfig {
        ratios: vec![0.25, 1.0],
        b_d: 2,
        b_m: 2,
        methods: vec![Method::CausalBatle, Method::Dragonnet, Method::Aipw],
        seed: 1,
        gwas: GwasConfig {
            n_samples: 500,
            n_snps: 150,
            ..GwasConfig::default()
        },
        train: TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        },
        network: NetworkConfig {
            shared_widths: vec![48, 48],
            head_widths: vec![24],
            ..NetworkConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let outcome = run_experiment(&cfg, out, jobs)?;
    println!("{} runs, {} failed", outcome.records.len(), outcome.failures());
    print!("{}", aggregate_csv(&outcome.aggregates));
    if keep.is_some() {
        println!("files in {}", out.display());
    }
    Ok(())
}
