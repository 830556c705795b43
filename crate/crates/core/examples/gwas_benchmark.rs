//! Simulates a GWAS dataset and fits every method on a Setting-1 split.
//!
//! cargo run --example gwas_benchmark -- [samples] [snps]

use batle::baselines::{aipw_estimate, fit_preset, make_preset, AipwConfig, Method};
use batle::data::split::fraction_from_ratio;
use batle::data::{simulate_gwas, split_setting1, GwasConfig};
use batle::network::NetworkConfig;
use batle::numeric::RngStream;
use batle::training::TrainConfig;

fn main() -> batle::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cfg = GwasConfig {
        n_samples: args.first().copied().unwrap_or(600),
        n_snps: args.get(1).copied().unwrap_or(300),
        ..GwasConfig::default()
    };
    let root = RngStream::new(7);
    let g = simulate_gwas(&cfg, &root.derive(1))?;
    let (gene, group, noise) = g.variance_shares();
    println!(
        "J={} covariates={} pruned={} shares=({gene:.2}, {group:.2}, {noise:.2})",
        g.target.n_rows(),
        g.target.n_features(),
        g.pruned_columns.len()
    );
    let tau = g.target.ground_truth.as_ref().unwrap().true_ate;

    let r = 0.25;
    let (target, source) = split_setting1(&g.target, fraction_from_ratio(r), &mut root.derive(2))?;
    println!("r={r}: n_t={} n_s={} tau={tau:.4}", target.n_rows(), source.n_rows());

    let train = TrainConfig {
        epochs: 60,
        ..TrainConfig::default()
    };
    let net = NetworkConfig {
        shared_widths: vec![64, 64],
        head_widths: vec![32],
        ..NetworkConfig::default()
    };
    for method in Method::ALL {
        let tau_hat = match method {
            Method::Aipw => {
                let (t, y) = (target.treatments().unwrap(), target.outcomes().unwrap());
                aipw_estimate(target.covariates.view(), t, y, &AipwConfig::default(), &mut root.derive(3))?.tau_hat
            }
            m => {
                let preset = make_preset(m.name(), &net)?;
                fit_preset(&preset, &train, &target, Some(&source), true, &root.derive(4))?.estimate.tau_hat
            }
        };
        println!("{:<20} tau_hat={tau_hat:>8.4} mae={:.4}", method.name(), (tau_hat - tau).abs());
    }
    Ok(())
}
