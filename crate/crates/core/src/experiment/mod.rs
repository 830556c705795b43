//! Experiment sweeps: datasets x ratios x methods x repetitions.
//!
//! Random streams, all derived from the master seed `s`:
//!
//! ```text
//! dataset d          s / 1 / d
//! split at ratio r   s / 2 / d / bits(r)
//! run (d, m, method) s / 3 / d / bits(r) / m / method
//! ```
//!
//! The ratio enters every run stream so no two grid cells share one.
//! Setting-1 splits are fixed per dataset replication and ratio, shared by
//! every method and model repetition.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{aipw_estimate, fit_preset, make_preset, Method};
use crate::data::split::fraction_from_ratio;
use crate::data::{
    generate_hcmnist, load_ihdp, load_mnist_dir, read_domain_csv, simulate_gwas, split_setting1, DomainDataset,
    ImageSet,
};
use crate::error::{Error, Result};
use crate::estimation::{aggregate, mae, Z_95};
use crate::numeric::sampling::permutation;
use crate::numeric::RngStream;

pub use config::{CustomData, DatasetKind, ExperimentConfig};

pub const RESULTS_HEADER: &str = "dataset_rep,model_rep,method,r,tau_true,tau_hat,mae,wall_time_s,seed,status";
pub const AGGREGATE_HEADER: &str = "method,r,B,mean_mae,ci_low,ci_high";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset_rep: usize,
    pub model_rep: usize,
    pub method: Method,
    pub r: f64,
    pub tau_true: f64,
    /// NaN when the run failed.
    pub tau_hat: f64,
    pub mae: f64,
    pub wall_time_s: f64,
    pub seed: u64,
    /// `ok` or `error:<code>`.
    pub status: String,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub r: f64,
    pub b: usize,
    pub mean_mae: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.ok()).count()
    }
}

/// Short code for the results CSV `status` column.
pub fn error_code(e: &Error) -> &'static str {
    match e {
        Error::InvalidConfig(_) => "invalid_config",
        Error::InvalidInput(_) => "invalid_input",
        Error::Shape(_) => "shape",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::BadMagic { .. } | Error::Truncated { .. } => "format",
        Error::Schema { .. } => "schema",
        Error::MaskedLabel { .. } => "masked_label",
        Error::NonFinite { .. } => "non_finite",
        Error::Diverged { .. } => "diverged",
        Error::SingleArm(_) => "single_arm",
        Error::FeatureSpace { .. } => "feature_space",
        Error::Numerical(_) => "numerical",
        Error::Io { .. } => "io",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
    }
}

fn method_id(m: Method) -> u64 {
    Method::ALL.iter().position(|&x| x == m).expect("listed") as u64
}

/// A dataset replication: either one labeled table or a target/source pair.
enum Replication {
    Labeled(DomainDataset),
    Paired(DomainDataset, DomainDataset),
}

struct Sources {
    images: Option<ImageSet>,
}

fn load_sources(cfg: &ExperimentConfig) -> Result<Sources> {
    let images = match cfg.dataset {
        DatasetKind::Hcmnist => Some(load_mnist_dir(cfg.mnist_dir.as_ref().expect("validated"))?),
        _ => None,
    };
    Ok(Sources { images })
}

fn replication(cfg: &ExperimentConfig, sources: &Sources, d: usize, root: &RngStream) -> Result<Replication> {
    let rng = root.derive_path(&[1, d as u64]);
    match cfg.dataset {
        DatasetKind::Gwas => Ok(Replication::Labeled(simulate_gwas(&cfg.gwas, &rng)?.target)),
        DatasetKind::Ihdp => Ok(Replication::Labeled(load_ihdp(cfg.ihdp_dir.as_ref().expect("validated"), d)?)),
        DatasetKind::Hcmnist => {
            let h = generate_hcmnist(sources.images.as_ref().expect("loaded"), &cfg.hcmnist, &rng)?;
            Ok(Replication::Paired(h.target, h.source))
        }
        DatasetKind::CustomCsv => {
            let c = cfg.custom.as_ref().expect("validated");
            let mut target = read_domain_csv(&c.target)?;
            let tau = match (c.tau_true, &c.sidecar) {
                (Some(t), _) => crate::data::GroundTruth::scalar(t),
                (None, Some(p)) => read_sidecar_truth(p)?,
                (None, None) => unreachable!("validated"),
            };
            if tau.mu0.as_ref().is_some_and(|m| m.len() == target.n_rows()) {
                target = target.with_ground_truth(tau);
            } else {
                target = target.with_ground_truth(crate::data::GroundTruth::scalar(tau.true_ate));
            }
            match &c.source {
                Some(s) => Ok(Replication::Paired(target, read_domain_csv(s)?)),
                None => Ok(Replication::Labeled(target)),
            }
        }
    }
}

fn read_sidecar_truth(path: &Path) -> Result<crate::data::GroundTruth> {
    #[derive(Deserialize)]
    struct Sidecar {
        ground_truth: Option<crate::data::GroundTruth>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let s: Sidecar = serde_json::from_str(&text)?;
    s.ground_truth
        .ok_or_else(|| Error::InvalidInput(format!("{} holds no ground truth", path.display())))
}

/// Subsamples one side of a target/source pair so that `n_t / n_s = r`.
/// The target is kept whole when the source is large enough; otherwise the
/// source is kept whole and the target is subsampled.
pub fn match_ratio(
    target: &DomainDataset,
    source: &DomainDataset,
    r: f64,
    rng: &mut RngStream,
) -> Result<(DomainDataset, DomainDataset)> {
    let (n_t, n_s) = (target.n_rows(), source.n_rows());
    let want_s = (n_t as f64 / r).round() as usize;
    let pick = |n: usize, k: usize, rng: &mut RngStream| {
        let mut rows = permutation(n, rng)[..k].to_vec();
        rows.sort_unstable();
        rows
    };
    if want_s >= 1 && want_s <= n_s {
        return Ok((target.clone(), source.select_rows(&pick(n_s, want_s, rng))));
    }
    let want_t = (r * n_s as f64).round() as usize;
    if want_t < 2 || want_t > n_t {
        return Err(Error::InvalidInput(format!(
            "ratio {r} is unreachable with {n_t} target and {n_s} source rows"
        )));
    }
    Ok((target.select_rows(&pick(n_t, want_t, rng)), source.clone()))
}

struct Job {
    d: usize,
    m: usize,
    ratio_index: usize,
    r: f64,
    method: Method,
    /// Error code when data preparation failed.
    split: Arc<std::result::Result<(DomainDataset, DomainDataset), &'static str>>,
}

fn run_job(cfg: &ExperimentConfig, job: &Job, root: &RngStream, history_dir: Option<&Path>) -> (RunRecord, f64) {
    let start = Instant::now();
    let rng = root.derive_path(&[3, job.d as u64, job.r.to_bits(), job.m as u64, method_id(job.method)]);
    let outcome = match job.split.as_ref() {
        Err(code) => Err(*code),
        Ok((target, source)) => estimate(cfg, job, target, source, &rng, history_dir).map_err(|e| error_code(&e)),
    };
    let tau_true = match job.split.as_ref() {
        Ok((t, _)) => t.ground_truth.as_ref().map_or(f64::NAN, |g| g.true_ate),
        Err(_) => f64::NAN,
    };
    let elapsed = start.elapsed().as_secs_f64();
    let (tau_hat, status) = match outcome {
        Ok(t) => (t, "ok".to_string()),
        Err(code) => (f64::NAN, format!("error:{code}")),
    };
    let record = RunRecord {
        dataset_rep: job.d,
        model_rep: job.m,
        method: job.method,
        r: job.r,
        tau_true,
        tau_hat,
        mae: mae(tau_hat, tau_true),
        wall_time_s: if cfg.record_wall_time { elapsed } else { f64::NAN },
        seed: cfg.seed,
        status,
    };
    (record, elapsed)
}

fn estimate(
    cfg: &ExperimentConfig,
    job: &Job,
    target: &DomainDataset,
    source: &DomainDataset,
    rng: &RngStream,
    history_dir: Option<&Path>,
) -> Result<f64> {
    if target.ground_truth.is_none() {
        return Err(Error::InvalidInput("target data carries no ground truth".into()));
    }
    match job.method {
        Method::Aipw => {
            let t = target.treatments().expect("labeled");
            let y = target.outcomes().expect("labeled");
            let est = aipw_estimate(target.covariates.view(), t, y, &cfg.aipw, &mut rng.derive(1))?;
            Ok(est.tau_hat)
        }
        m => {
            let preset = make_preset(m.name(), &cfg.network)?;
            let fit = fit_preset(&preset, &cfg.train, target, Some(source), cfg.standardize_outcome, rng)?;
            if let Some(dir) = history_dir {
                let name = format!("r{}_d{}_m{}_{}.csv", job.ratio_index, job.d, job.m, m.name());
                fit.history.write_csv(&dir.join(name))?;
            }
            Ok(fit.estimate.tau_hat)
        }
    }
}

/// Runs the full grid on a pool of `jobs` workers. Records come back in grid
/// order (ratio, dataset replication, method, model repetition) whatever
/// the worker count.
pub fn execute(cfg: &ExperimentConfig, jobs: usize, history_dir: Option<&Path>) -> Result<(Vec<RunRecord>, Vec<f64>)> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let root = RngStream::new(cfg.seed);
    let sources = load_sources(cfg)?;

    let mut grid: Vec<(usize, RunRecord, f64)> = Vec::with_capacity(cfg.n_runs());
    for d in 0..cfg.b_d {
        let rep = replication(cfg, &sources, d, &root).map(Arc::new);
        let mut batch = Vec::new();
        for (ri, &r) in cfg.ratios.iter().enumerate() {
            let mut split_rng = root.derive_path(&[2, d as u64, r.to_bits()]);
            let split = match &rep {
                Err(e) => Err(error_code(e)),
                Ok(rep) => match rep.as_ref() {
                    Replication::Labeled(ds) => split_setting1(ds, fraction_from_ratio(r), &mut split_rng),
                    Replication::Paired(t, s) => match_ratio(t, s, r, &mut split_rng),
                }
                .map_err(|e| error_code(&e)),
            };
            let split = Arc::new(split);
            for &method in &cfg.methods {
                for m in 0..cfg.b_m {
                    batch.push(Job {
                        d,
                        m,
                        ratio_index: ri,
                        r,
                        method,
                        split: Arc::clone(&split),
                    });
                }
            }
        }
        let done: Vec<(RunRecord, f64)> =
            pool.install(|| batch.par_iter().map(|j| run_job(cfg, j, &root, history_dir)).collect());
        for (job, (rec, secs)) in batch.iter().zip(done) {
            let order = job.ratio_index * cfg.b_d * cfg.methods.len() * cfg.b_m
                + job.d * cfg.methods.len() * cfg.b_m
                + cfg.methods.iter().position(|&x| x == job.method).expect("listed") * cfg.b_m
                + job.m;
            grid.push((order, rec, secs));
        }
    }
    grid.sort_by_key(|(o, _, _)| *o);
    let (records, secs) = grid.into_iter().map(|(_, r, s)| (r, s)).unzip();
    Ok((records, secs))
}

/// Mean MAE and 95% interval per (method, ratio) over successful runs, in
/// config order.
pub fn aggregate_records(cfg_methods: &[Method], ratios: &[f64], records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &r in ratios {
        for &method in cfg_methods {
            let maes: Vec<f64> = records
                .iter()
                .filter(|x| x.method == method && x.r.to_bits() == r.to_bits() && x.ok())
                .map(|x| x.mae)
                .collect();
            let row = match aggregate(&maes) {
                Ok(a) => AggregateRow {
                    method,
                    r,
                    b: a.b,
                    mean_mae: a.mean_mae,
                    ci_low: a.ci_low,
                    ci_high: a.ci_high,
                },
                Err(_) => AggregateRow {
                    method,
                    r,
                    b: 0,
                    mean_mae: f64::NAN,
                    ci_low: f64::NAN,
                    ci_high: f64::NAN,
                },
            };
            rows.push(row);
        }
    }
    rows
}

fn field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn results_csv(records: &[RunRecord]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.dataset_rep,
            r.model_rep,
            r.method,
            r.r,
            field(r.tau_true),
            field(r.tau_hat),
            field(r.mae),
            field(r.wall_time_s),
            r.seed,
            r.status
        );
    }
    s
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = format!("{AGGREGATE_HEADER}\n");
    for a in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            a.method,
            a.r,
            a.b,
            field(a.mean_mae),
            field(a.ci_low),
            field(a.ci_high)
        );
    }
    s
}

/// Parses a results CSV written by [`results_csv`].
pub fn read_results_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if headers != RESULTS_HEADER {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            column: headers,
            problem: format!("is not the results header `{RESULTS_HEADER}`"),
        });
    }
    let num = |s: &str| -> f64 {
        if s.is_empty() {
            f64::NAN
        } else {
            s.parse().unwrap_or(f64::NAN)
        }
    };
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let bad = |c: &str| Error::Schema {
            path: path.to_path_buf(),
            column: c.into(),
            problem: "holds an unparsable value".into(),
        };
        out.push(RunRecord {
            dataset_rep: rec[0].parse().map_err(|_| bad("dataset_rep"))?,
            model_rep: rec[1].parse().map_err(|_| bad("model_rep"))?,
            method: rec[2].parse()?,
            r: rec[3].parse().map_err(|_| bad("r"))?,
            tau_true: num(&rec[4]),
            tau_hat: num(&rec[5]),
            mae: num(&rec[6]),
            wall_time_s: num(&rec[7]),
            seed: rec[8].parse().map_err(|_| bad("seed"))?,
            status: rec[9].to_string(),
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct Metadata<'a> {
    package: &'static str,
    version: &'static str,
    os: &'static str,
    arch: &'static str,
    jobs: usize,
    runs: usize,
    failed_runs: usize,
    ci_method: String,
    split_policy: &'static str,
    seed_derivation: &'static str,
    config: &'a ExperimentConfig,
}

/// Output files written by [`run_experiment`].
pub struct OutputPaths {
    pub results: PathBuf,
    pub aggregate: PathBuf,
    pub timings: PathBuf,
    pub resolved_config: PathBuf,
    pub metadata: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: &Path) -> Self {
        Self {
            results: dir.join("results.csv"),
            aggregate: dir.join("aggregate.csv"),
            timings: dir.join("timings.csv"),
            resolved_config: dir.join("config.resolved.json"),
            metadata: dir.join("metadata.json"),
        }
    }
}

/// Runs the sweep and writes every output file into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let paths = OutputPaths::new(out_dir);
    let write = |p: &Path, s: &str| std::fs::write(p, s).map_err(|e| Error::io(p, e));
    write(&paths.resolved_config, &serde_json::to_string_pretty(cfg)?)?;

    let history_dir = if cfg.save_histories {
        let d = out_dir.join("histories");
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        Some(d)
    } else {
        None
    };
    let (records, secs) = execute(cfg, jobs, history_dir.as_deref())?;
    let aggregates = aggregate_records(&cfg.methods, &cfg.ratios, &records);

    write(&paths.results, &results_csv(&records))?;
    write(&paths.aggregate, &aggregate_csv(&aggregates))?;
    let mut timings = String::from("dataset_rep,model_rep,method,r,wall_time_s\n");
    for (r, s) in records.iter().zip(&secs) {
        let _ = writeln!(timings, "{},{},{},{},{}", r.dataset_rep, r.model_rep, r.method, r.r, s);
    }
    write(&paths.timings, &timings)?;

    let outcome = ExperimentOutcome { records, aggregates };
    let meta = Metadata {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        os: std::env::consts::OS,
        arch: std::env::consts::ARCH,
        jobs,
        runs: outcome.records.len(),
        failed_runs: outcome.failures(),
        ci_method: format!("normal approximation, mean +- {Z_95} sd / sqrt(B), failed runs excluded"),
        split_policy: "setting 1: one split per (dataset replication, ratio), shared across methods and model repetitions; \
                       setting 2: one side subsampled to reach the ratio",
        seed_derivation: "dataset s/1/d, split s/2/d/bits(r), run s/3/d/bits(r)/m/method",
        config: cfg,
    };
    write(&paths.metadata, &serde_json::to_string_pretty(&meta)?)?;
    Ok(outcome)
}
