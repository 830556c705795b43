use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use batle::baselines::{aipw_estimate, AipwConfig};
use batle::data::{
    generate_hcmnist, load_mnist_dir, read_domain_csv, simulate_gwas, write_domain_csv, write_sidecar, GwasConfig,
    HcmnistConfig,
};
use batle::experiment::{run_experiment, ExperimentConfig};
use batle::numeric::RngStream;
use batle::Error;

#[derive(Parser)]
#[command(name = "batle", version, about = "Treatment-effect experiments with a small labeled target domain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write results, aggregates and metadata.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Simulate one GWAS dataset into `target.csv` plus `sidecar.json`.
    GenGwas {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an HCMNIST target/source pair from MNIST IDX files.
    GenHcmnist {
        #[arg(long)]
        mnist: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-fitted AIPW estimate on a labeled domain CSV.
    Aipw {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

const EXIT_ERROR: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUN_FAILED: u8 = 3;

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => EXIT_CONFIG,
        _ => EXIT_ERROR,
    }
}

fn read_config<C: DeserializeOwned>(path: &Path) -> batle::Result<C> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> batle::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(command: Command) -> batle::Result<u8> {
    match command {
        Command::Run { config, out, jobs } => {
            let cfg = ExperimentConfig::from_path(&config).map_err(|e| match e {
                Error::Io { .. } => Error::InvalidConfig(e.to_string()),
                e => e,
            })?;
            let outcome = run_experiment(&cfg, &out, jobs)?;
            let failed = outcome.failures();
            eprintln!("{} runs, {} failed; results in {}", outcome.records.len(), failed, out.display());
            Ok(if failed > 0 { EXIT_RUN_FAILED } else { 0 })
        }
        Command::GenGwas { config, out } => {
            let cfg: GwasConfig = read_config(&config)?;
            cfg.validate()?;
            let data = simulate_gwas(&cfg, &RngStream::new(cfg.seed))?;
            create_dir(&out)?;
            write_domain_csv(&out.join("target.csv"), &data.target)?;
            write_sidecar(&out.join("sidecar.json"), data.target.ground_truth.as_ref(), &cfg)?;
            Ok(0)
        }
        Command::GenHcmnist { mnist, config, out } => {
            let cfg: HcmnistConfig = read_config(&config)?;
            cfg.validate()?;
            let images = load_mnist_dir(&mnist)?;
            let data = generate_hcmnist(&images, &cfg, &RngStream::new(cfg.seed))?;
            create_dir(&out)?;
            write_domain_csv(&out.join("target.csv"), &data.target)?;
            write_domain_csv(&out.join("source.csv"), &data.source)?;
            write_sidecar(&out.join("sidecar.json"), data.target.ground_truth.as_ref(), &cfg)?;
            Ok(0)
        }
        Command::Aipw { data, seed } => {
            let ds = read_domain_csv(&data)?;
            let (t, y) = match (ds.treatments(), ds.outcomes()) {
                (Some(t), Some(y)) => (t, y),
                _ => return Err(Error::InvalidInput(format!("{} holds no labeled rows", data.display()))),
            };
            let est = aipw_estimate(ds.covariates.view(), t, y, &AipwConfig::default(), &mut RngStream::new(seed))?;
            println!("{}", serde_json::json!({ "tau_hat": est.tau_hat, "n": ds.n_rows() }));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
