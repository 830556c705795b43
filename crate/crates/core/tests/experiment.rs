use std::path::Path;

use batle::data::ihdp::replication_path;
use batle::data::load_ihdp;
use batle::experiment::{read_results_csv, run_experiment, ExperimentConfig, AGGREGATE_HEADER, RESULTS_HEADER};

fn config(json: &str, dir: &Path) -> ExperimentConfig {
    ExperimentConfig::from_json(json, dir).unwrap()
}

/// Writes ten IHDP-format replications with a known constant effect of 4.
fn write_ihdp(dir: &Path, n: usize) {
    for k in 0..10 {
        let mut s = String::from("treatment,y_factual,y_cfactual,mu0,mu1,x1,x2,x3\n");
        for i in 0..n {
            let x: Vec<f64> = (0..3).map(|j| ((i * 7 + j * 13 + k) as f64 * 0.31).sin()).collect();
            let t = ((i + k) % 3 == 0) as u8;
            let mu0 = 1.0 + x[0];
            let mu1 = mu0 + 4.0;
            let (yf, ycf) = if t == 1 { (mu1, mu0) } else { (mu0, mu1) };
            s.push_str(&format!("{t},{yf},{ycf},{mu0},{mu1},{},{},{}\n", x[0], x[1], x[2]));
        }
        std::fs::write(replication_path(dir, k), s).unwrap();
    }
}

#[test]
fn smoke_run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"dataset": "gwas", "gwas": {"n_samples": 300, "n_snps": 200}, "ratios": [0.5],
            "b_d": 1, "b_m": 1, "methods": ["causal_batle"], "train": {"epochs": 3},
            "network": {"shared_widths": [16], "head_widths": [8]}}"#,
        dir.path(),
    );
    let out = dir.path().join("out");
    let outcome = run_experiment(&cfg, &out, 1).unwrap();
    assert_eq!(outcome.records.len(), 1);
    assert_eq!(outcome.aggregates.len(), 1);
    assert_eq!(outcome.failures(), 0);

    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().next().unwrap(), RESULTS_HEADER);
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().next().unwrap(), AGGREGATE_HEADER);
    assert_eq!(agg.lines().count(), 2);
    for f in ["config.resolved.json", "metadata.json", "timings.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let back = read_results_csv(&out.join("results.csv")).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back[0].tau_hat.to_bits(), outcome.records[0].tau_hat.to_bits());

    // The resolved config reloads to the same experiment.
    let resolved = std::fs::read_to_string(out.join("config.resolved.json")).unwrap();
    assert_eq!(config(&resolved, &out), cfg);
}

#[test]
fn record_count_is_the_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"dataset": "gwas", "gwas": {"n_samples": 300, "n_snps": 40}, "ratios": [0.5, 1.0, 2.0],
            "b_d": 2, "b_m": 2, "methods": ["aipw", "aipw"]}"#,
        dir.path(),
    );
    let outcome = run_experiment(&cfg, &dir.path().join("out"), 1).unwrap();
    assert_eq!(outcome.records.len(), 24);
    assert_eq!(outcome.aggregates.len(), 6);
}

#[test]
fn ihdp_sweep_reads_replications_in_order() {
    let dir = tempfile::tempdir().unwrap();
    write_ihdp(dir.path(), 150);
    let rep = load_ihdp(dir.path(), 2).unwrap();
    assert_eq!(rep.n_rows(), 150);
    assert_eq!(rep.ground_truth.as_ref().unwrap().true_ate, 4.0);

    let cfg = config(r#"{"dataset": "ihdp", "ihdp_dir": ".", "ratios": [1.0], "b_d": 3, "b_m": 1, "methods": ["aipw"]}"#, dir.path());
    let outcome = run_experiment(&cfg, &dir.path().join("out"), 1).unwrap();
    assert_eq!(outcome.records.len(), 3);
    for (d, r) in outcome.records.iter().enumerate() {
        assert_eq!(r.dataset_rep, d);
        assert!(r.ok(), "{}", r.status);
        assert!((r.tau_true - 4.0).abs() < 1e-12);
        // Outcomes are noise free and linear in x, so AIPW is nearly exact.
        assert!(r.mae < 0.05, "{}", r.mae);
    }
}

#[test]
fn setting_two_custom_csv_matches_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let mut target = String::from("d,t,y,x_0\n");
    for i in 0..80 {
        let x = (i as f64 * 0.7).sin();
        let t = (i % 2) as f64;
        target.push_str(&format!("1,{t},{},{x}\n", 2.0 * t + x));
    }
    let mut source = String::from("d,t,y,x_0\n");
    for i in 0..400 {
        source.push_str(&format!("0,,,{}\n", (i as f64 * 0.3).cos()));
    }
    std::fs::write(dir.path().join("t.csv"), target).unwrap();
    std::fs::write(dir.path().join("s.csv"), source).unwrap();
    let cfg = config(
        r#"{"dataset": "custom-csv", "setting": 2, "ratios": [0.5, 0.1],
            "custom": {"target": "t.csv", "source": "s.csv", "tau_true": 2.0},
            "b_d": 1, "b_m": 1, "methods": ["aipw", "causal_batle"], "train": {"epochs": 2},
            "network": {"shared_widths": [8], "head_widths": [4]}}"#,
        dir.path(),
    );
    let outcome = run_experiment(&cfg, &dir.path().join("out"), 1).unwrap();
    assert_eq!(outcome.records.len(), 4);
    assert_eq!(outcome.failures(), 0, "{:?}", outcome.records.iter().map(|r| &r.status).collect::<Vec<_>>());
    let meta = std::fs::read_to_string(dir.path().join("out/metadata.json")).unwrap();
    assert!(meta.contains("seed"), "{meta}");
}

#[test]
fn setting_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = ExperimentConfig::from_json(r#"{"dataset": "gwas", "setting": 2, "ratios": [1.0]}"#, dir.path()).unwrap_err();
    assert!(err.to_string().contains("setting 2"), "{err}");
}
