//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use batle::baselines::{aipw_estimate, aipw_from_nuisances, fit_preset, make_preset, AipwConfig, Method, ModelPreset};
use batle::data::hcmnist::{outcome_mean, propensity};
use batle::data::{generate_hcmnist, simulate_gwas, split_setting1, DomainDataset, GwasConfig, HcmnistConfig, ImageSet};
use batle::estimation::{predict_mc_dropout, predict_point};
use batle::experiment::{execute, ExperimentConfig};
use batle::losses::{adversarial_loss, discriminator_loss, outcome_loss, reconstruction_loss, LossWeights};
use batle::network::{NetworkConfig, Parameters};
use batle::numeric::sampling::{sample_normal, standard_normal};
use batle::numeric::{sigmoid, RngStream};
use batle::training::TrainConfig;
use common::{max_relative_error, one_hot_weights, random_case};
use ndarray::Array2;
use rand::Rng;

type Check = fn() -> String;

fn gradient_oracle() -> String {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let case = random_case(1000 + seed);
        let mut weights: Vec<LossWeights> = (0..5).map(one_hot_weights).collect();
        weights.push(LossWeights::from_array([1.0, 0.7, 0.5, 0.3, 2.0]));
        for (k, w) in weights.iter().enumerate() {
            let e = max_relative_error(&case, w, 1e-5, 1e-6);
            assert!(e < 1e-4, "config {seed}, weight set {k}: relative error {e:e}");
            worst = worst.max(e);
        }
    }
    format!("20 configs x 6 losses, max relative error {worst:.2e}")
}

fn closed_form_losses() -> String {
    let ld = discriminator_loss(&[1.0, 0.0, 1.0, 0.0], &[0.5; 4]).unwrap();
    assert!((ld - std::f64::consts::LN_2).abs() < 1e-9, "l_d = {ld}");
    let la = adversarial_loss(&[0.0; 5]).unwrap();
    assert!(la.abs() < 1e-9, "l_a = {la}");
    let x = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 - j as f64) * 0.3);
    let lr = reconstruction_loss(x.view(), x.view()).unwrap();
    assert!(lr.abs() < 1e-9, "l_r = {lr}");
    let y = [0.3, -1.2, 2.0, 0.0];
    let t = [1.0, 0.0, 1.0, 0.0];
    let ly = outcome_loss(&y, &t, &y, &y, &[1.0; 4], &[1.0; 4], &[true; 4]).unwrap();
    let expect = 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((ly - expect).abs() < 1e-9, "l_y = {ly}");
    "l_d = ln 2, l_a = 0, l_r = 0, l_y = log(2 pi)/2".into()
}

fn gwas_generator() -> String {
    let cfg = GwasConfig {
        n_samples: 500,
        n_snps: 1000,
        ..GwasConfig::default()
    };
    let mut shares = Vec::new();
    for seed in 0..5 {
        let g = simulate_gwas(&cfg, &RngStream::new(seed)).unwrap();
        let (gene, group, noise) = g.variance_shares();
        for (got, want) in [(gene, 0.4), (group, 0.4), (noise, 0.2)] {
            assert!((got - want).abs() <= 0.08, "seed {seed}: shares ({gene:.3}, {group:.3}, {noise:.3})");
        }
        let nonzero = g.coefficients.iter().filter(|&&c| c != 0.0).count();
        assert_eq!(nonzero, 1, "seed {seed}");
        shares.push(format!("({gene:.2},{group:.2},{noise:.2})"));
    }
    format!("shares {}", shares.join(" "))
}

/// Images of constant intensity, so phi spreads evenly over its range.
fn flat_images(per_digit: &[(u8, usize)], seed: u64) -> ImageSet {
    let mut r = RngStream::new(seed);
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for &(d, count) in per_digit {
        for _ in 0..count {
            let v: u8 = r.random();
            pixels.extend([v; 4]);
            labels.push(d);
        }
    }
    ImageSet {
        rows: 2,
        cols: 2,
        pixels,
        labels,
    }
}

fn hcmnist_generator() -> String {
    assert_eq!(outcome_mean(1.0, 0.0), 3.0);
    assert_eq!(outcome_mean(0.0, 0.0), 1.0);

    let images = flat_images(&[(3, 5000), (8, 5000), (1, 200)], 11);
    let cfg = HcmnistConfig {
        target_digits: Some([3, 8]),
        ..HcmnistConfig::default()
    };
    let h = generate_hcmnist(&images, &cfg, &RngStream::new(12)).unwrap();
    assert_eq!(h.phi.len(), 10_000);
    let t = h.target.treatments().unwrap();
    let bins = 8;
    let mut count = vec![0usize; bins];
    let mut treated = vec![0.0; bins];
    let mut expected = vec![0.0; bins];
    for (i, &p) in h.phi.iter().enumerate() {
        let b = (((p + 2.0) / 4.0 * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        treated[b] += t[i];
        expected[b] += propensity(p);
    }
    let mut worst: f64 = 0.0;
    for b in 0..bins {
        assert!(count[b] > 0, "bin {b} is empty");
        let gap = (treated[b] / count[b] as f64 - expected[b] / count[b] as f64).abs();
        assert!(gap <= 0.05, "bin {b}: treated fraction off by {gap:.3} over {} rows", count[b]);
        worst = worst.max(gap);
    }
    assert!((propensity(0.0) - sigmoid(0.5)).abs() < 1e-15);
    format!("Y(1,0)=3, Y(0,0)=1, max bin gap {worst:.3}")
}

/// Low-dimensional linear data: covariates N(0, 1), logistic treatment,
/// tau ~ N(0, 0.5) as in the GWAS simulator.
pub fn linear_dataset(n: usize, v: usize, seed: u64) -> (DomainDataset, f64) {
    let mut r = RngStream::new(seed);
    let tau = sample_normal(0.0, 0.5, &mut r).unwrap();
    let gamma: Vec<f64> = (0..v).map(|_| standard_normal(&mut r) / (v as f64).sqrt()).collect();
    let x = Array2::from_shape_simple_fn((n, v), || standard_normal(&mut r));
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let ti = if r.random::<f64>() < sigmoid(0.5 * x[[i, 0]] - 0.3 * x[[i, 1]]) { 1.0 } else { 0.0 };
        let lin: f64 = (0..v).map(|j| gamma[j] * x[[i, j]]).sum();
        t.push(ti);
        y.push(tau * ti + lin + 0.5 * standard_normal(&mut r));
    }
    let ds = DomainDataset::target(x, t, y)
        .unwrap()
        .with_ground_truth(batle::data::GroundTruth::scalar(tau));
    (ds, tau)
}

fn ate_recovery() -> String {
    let (ds, tau) = linear_dataset(2000, 10, 5);
    let (target, source) = split_setting1(&ds, 0.5, &mut RngStream::new(6)).unwrap();
    let preset = make_preset("causal_batle", &NetworkConfig::default()).unwrap();
    let start = Instant::now();
    let fit = fit_preset(&preset, &TrainConfig::default(), &target, Some(&source), true, &RngStream::new(7)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = (fit.estimate.tau_hat - tau).abs();
    let tol = 0.2 * tau.abs() + 0.1;
    assert!(err <= tol, "tau {tau:.4}, estimate {:.4}, error {err:.4} > {tol:.4}", fit.estimate.tau_hat);
    assert!(secs < 300.0, "took {secs:.0} s");
    format!("tau {tau:.3}, estimate {:.3}, error {err:.3} <= {tol:.3}, {secs:.0} s", fit.estimate.tau_hat)
}

fn preset_reduction() -> String {
    let (ds, _) = linear_dataset(300, 6, 21);
    let (target, source) = split_setting1(&ds, 0.4, &mut RngStream::new(22)).unwrap();
    let net = NetworkConfig {
        shared_widths: vec![16, 16],
        head_widths: vec![8],
        ..NetworkConfig::default()
    };
    let train = TrainConfig {
        epochs: 15,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let bayes = make_preset("bayesian_dragonnet", &net).unwrap();
    let reduced = ModelPreset {
        method: Method::CausalBatle,
        network: NetworkConfig {
            discriminator_enabled: false,
            reconstruction_enabled: false,
            ..net.clone()
        },
        zero_transfer_weights: false,
        mc_passes: 30,
        mc_dropout: true,
    };
    let mut reduced_train = train.clone();
    reduced_train.weights.discriminator = 0.0;
    reduced_train.weights.adversarial = 0.0;
    reduced_train.weights.reconstruction = 0.0;

    let rng = RngStream::new(23);
    let a = fit_preset(&bayes, &train, &target, Some(&source), true, &rng).unwrap();
    let b = fit_preset(&reduced, &reduced_train, &target, Some(&source), true, &rng).unwrap();
    assert!(a.params == b.params, "parameters differ");
    assert_eq!(a.history.to_csv(), b.history.to_csv());
    assert_eq!(a.estimate.tau_hat.to_bits(), b.estimate.tau_hat.to_bits());
    format!("identical parameters and estimate {:.6}", a.estimate.tau_hat)
}

fn trend_check() -> String {
    let cfg = ExperimentConfig {
        ratios: vec![0.25],
        b_d: 3,
        b_m: 3,
        methods: vec![Method::CausalBatle, Method::Dragonnet],
        seed: 2024,
        gwas: GwasConfig {
            n_samples: 1000,
            n_snps: 1000,
            ..GwasConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let (records, _) = execute(&cfg, 1, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mean = |m: Method| {
        let v: Vec<f64> = records.iter().filter(|r| r.method == m).map(|r| r.mae).collect();
        assert_eq!(v.len(), 9);
        assert!(v.iter().all(|x| x.is_finite()), "{m} has failed runs");
        v.iter().sum::<f64>() / v.len() as f64
    };
    let cb = mean(Method::CausalBatle);
    let dn = mean(Method::Dragonnet);
    assert!(cb <= dn, "causal_batle mean MAE {cb:.4} > dragonnet {dn:.4}");
    assert!(secs < 1200.0, "took {secs:.0} s");
    format!("mean MAE causal_batle {cb:.4} <= dragonnet {dn:.4}, {secs:.0} s")
}

fn aipw_identity() -> String {
    let mut r = RngStream::new(31);
    let n = 200;
    let t: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let y: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 4.0 - 1.0).collect();
    let tau = aipw_from_nuisances(&t, &y, &vec![0.5; n], &vec![0.0; n], &vec![0.0; n], 0.01).unwrap();
    let arm = |v: f64| {
        let s: Vec<f64> = (0..n).filter(|&i| t[i] == v).map(|i| y[i]).collect();
        s.iter().sum::<f64>() / s.len() as f64
    };
    let diff = arm(1.0) - arm(0.0);
    assert!((tau - diff).abs() < 1e-10, "{tau} vs {diff}");

    // Hand-evaluated fixture.
    let t = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
    let y = [2.0, 3.0, 1.0, 0.5, 1.0, -1.0];
    let e = [0.8, 0.5, 0.25, 0.5, 0.2, 0.75];
    let mu0 = [0.0, 1.0, 0.5, 0.0, 1.0, -0.5];
    let mu1 = [1.0, 2.0, 1.5, 1.0, 1.5, 0.0];
    // Per-row terms:
    // 1 - 0 + 1/0.8                   = 2.25
    // 2 - 1 + 1/0.5                   = 3
    // 1.5 - 0.5 + (-0.5)/0.25         = -1
    // 1 - 0 - 0.5/0.5                 = 0
    // 1.5 - 1 - 0/0.8                 = 0.5
    // 0 - (-0.5) - (-0.5)/0.25        = 2.5
    let manual = (2.25 + 3.0 - 1.0 + 0.0 + 0.5 + 2.5) / 6.0;
    let got = aipw_from_nuisances(&t, &y, &e, &mu0, &mu1, 0.01).unwrap();
    assert!((got - manual).abs() < 1e-10, "{got} vs {manual}");

    // The cross-fitted estimator runs on the same kind of data.
    let x = Array2::from_shape_simple_fn((n, 2), || r.random::<f64>());
    let t: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let y: Vec<f64> = (0..n).map(|i| x[[i, 0]] + t[i]).collect();
    aipw_estimate(x.view(), &t, &y, &AipwConfig::default(), &mut r).unwrap();
    format!("difference of means and 6-row fixture ({manual:.6}) match")
}

fn cli_determinism() -> String {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{"dataset": "gwas", "b_d": 1, "b_m": 2, "ratios": [0.5], "methods": ["causal_batle", "aipw"],
            "seed": 9, "gwas": {"n_samples": 400, "n_snps": 60},
            "train": {"epochs": 10},
            "network": {"shared_widths": [32, 32], "head_widths": [16]}}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_batle"))
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--jobs", "1"])
            .status()
            .unwrap();
        assert!(status.success(), "exit {status}");
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert!(a == b, "results differ");
    format!("two runs, {} identical bytes", a.len())
}

fn mc_dropout_contract() -> String {
    let x = Array2::from_shape_fn((20, 5), |(i, j)| ((i * 5 + j) as f64 * 0.13).sin());
    let net = |rate: f64| {
        let cfg = NetworkConfig {
            input_dim: 5,
            shared_widths: vec![32, 32],
            head_widths: vec![16],
            dropout_rate: rate,
            ..NetworkConfig::default()
        };
        Parameters::init(&cfg, &RngStream::new(41)).unwrap()
    };
    let p = net(0.0);
    let mc = predict_mc_dropout(&p, x.view(), 30, &mut RngStream::new(42)).unwrap();
    let point = predict_point(&p, x.view()).unwrap();
    assert!(mc.mu0 == point.mu0 && mc.mu1 == point.mu1, "rate 0 differs from the dropout-off pass");

    let p = net(0.5);
    let mc = predict_mc_dropout(&p, x.view(), 30, &mut RngStream::new(43)).unwrap();
    let spread = mc.mu0_sd.iter().chain(mc.mu1_sd.iter()).cloned().fold(f64::INFINITY, f64::min);
    assert!(spread > 0.0, "zero spread at rate 0.5");
    format!("rate 0 exact, rate 0.5 min spread {spread:.3e}")
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 10] = [
        ("gradient oracle", gradient_oracle),
        ("closed-form loss values", closed_form_losses),
        ("GWAS generator", gwas_generator),
        ("HCMNIST generator", hcmnist_generator),
        ("end-to-end ATE recovery", ate_recovery),
        ("preset reduction", preset_reduction),
        ("low-ratio trend", trend_check),
        ("AIPW identity", aipw_identity),
        ("CLI determinism", cli_determinism),
        ("MC-dropout contract", mc_dropout_contract),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}) [{secs:.1}s]", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {:>2} {name}: FAIL ({msg}) [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
