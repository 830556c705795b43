use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{AipwConfig, Method};
use crate::data::hcmnist::HcmnistConfig;
use crate::data::ihdp::REPLICATIONS;
use crate::data::split::fraction_from_ratio;
use crate::data::GwasConfig;
use crate::error::{Error, Result};
use crate::network::NetworkConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetKind {
    #[serde(rename = "gwas")]
    Gwas,
    #[serde(rename = "ihdp")]
    Ihdp,
    #[serde(rename = "hcmnist")]
    Hcmnist,
    #[serde(rename = "custom-csv", alias = "custom_csv")]
    CustomCsv,
}

/// Pre-exported domain CSVs (see `data::export`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomData {
    pub target: PathBuf,
    #[serde(default)]
    pub source: Option<PathBuf>,
    /// True ATE; read from `sidecar` when absent.
    #[serde(default)]
    pub tau_true: Option<f64>,
    #[serde(default)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    /// 1: split one labeled dataset; 2: separate target and source data.
    pub setting: u8,
    /// Target/source ratios `r = n_t / n_s`.
    pub ratios: Vec<f64>,
    /// Alternative to `ratios`, as target fractions `p_t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_fractions: Option<Vec<f64>>,
    pub b_d: usize,
    pub b_m: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub train: TrainConfig,
    pub network: NetworkConfig,
    pub aipw: AipwConfig,
    pub gwas: GwasConfig,
    pub hcmnist: HcmnistConfig,
    pub ihdp_dir: Option<PathBuf>,
    pub mnist_dir: Option<PathBuf>,
    pub custom: Option<CustomData>,
    /// Standardize target outcomes for network training.
    pub standardize_outcome: bool,
    /// Write measured wall times into the results CSV. Off by default so the
    /// results file is a deterministic function of the config; timings always
    /// go to `timings.csv`.
    pub record_wall_time: bool,
    /// Write each run's training history under `histories/`.
    pub save_histories: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Gwas,
            setting: 1,
            ratios: Vec::new(),
            target_fractions: None,
            b_d: 1,
            b_m: 1,
            methods: vec![Method::CausalBatle],
            seed: 0,
            train: TrainConfig::default(),
            network: NetworkConfig::default(),
            aipw: AipwConfig::default(),
            gwas: GwasConfig::default(),
            hcmnist: HcmnistConfig::default(),
            ihdp_dir: None,
            mnist_dir: None,
            custom: None,
            standardize_outcome: true,
            record_wall_time: false,
            save_histories: false,
        }
    }
}

fn rule(m: impl Into<String>) -> Error {
    Error::InvalidConfig(m.into())
}

impl ExperimentConfig {
    /// Parses JSON and resolves defaults. Relative paths are taken relative
    /// to `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| rule(e.to_string()))?;
        cfg.resolve(base_dir)?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    fn resolve(&mut self, base: &Path) -> Result<()> {
        if let Some(fr) = self.target_fractions.take() {
            if !self.ratios.is_empty() {
                return Err(rule("give either `ratios` or `target_fractions`, not both"));
            }
            for &p in &fr {
                if !(p > 0.0 && p < 1.0) {
                    return Err(rule(format!("target fraction {p} must lie in (0, 1)")));
                }
            }
            self.ratios = fr.iter().map(|&p| p / (1.0 - p)).collect();
        }
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.ihdp_dir.as_mut().map(abs);
        self.mnist_dir.as_mut().map(abs);
        if let Some(c) = &mut self.custom {
            abs(&mut c.target);
            c.source.as_mut().map(abs);
            c.sidecar.as_mut().map(abs);
        }
        if let Some(p) = &mut self.gwas.reference_panel_path {
            abs(p);
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(rule("`ratios` must list at least one value"));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(rule(format!("ratio {r} violates r > 0")));
        }
        if self.b_d == 0 || self.b_m == 0 {
            return Err(rule("b_d and b_m must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(rule("`methods` must list at least one method"));
        }
        self.train.validate()?;
        self.network.clone().with_input_dim(self.network.input_dim.max(1)).validate()?;
        self.aipw_checks()?;

        match (self.setting, self.dataset) {
            (1, DatasetKind::Gwas) => self.gwas.validate()?,
            (1, DatasetKind::Ihdp) => {
                if self.ihdp_dir.is_none() {
                    return Err(rule("dataset `ihdp` needs `ihdp_dir`"));
                }
                if self.b_d > REPLICATIONS {
                    return Err(rule(format!("IHDP has {REPLICATIONS} replications; b_d = {} is too large", self.b_d)));
                }
            }
            (2, DatasetKind::Hcmnist) => {
                if self.mnist_dir.is_none() {
                    return Err(rule("dataset `hcmnist` needs `mnist_dir`"));
                }
                self.hcmnist.validate()?;
            }
            (s, DatasetKind::CustomCsv) => {
                let c = self.custom.as_ref().ok_or_else(|| rule("dataset `custom-csv` needs a `custom` block"))?;
                match (s, c.source.is_some()) {
                    (1, true) => return Err(rule("setting 1 splits one labeled dataset; drop `custom.source`")),
                    (2, false) => return Err(rule("setting 2 needs paired data; set `custom.source`")),
                    (1 | 2, _) => {}
                    _ => return Err(rule(format!("setting must be 1 or 2, got {s}"))),
                }
                if c.tau_true.is_none() && c.sidecar.is_none() {
                    return Err(rule("`custom` needs `tau_true` or a `sidecar` with ground truth"));
                }
            }
            (1, DatasetKind::Hcmnist) => {
                return Err(rule("setting 1 requires a labeled single-domain dataset; hcmnist provides paired domains"))
            }
            (2, d) => {
                return Err(rule(format!(
                    "setting 2 requires paired target/source data; {d:?} is a single labeled dataset"
                )))
            }
            (s, _) => return Err(rule(format!("setting must be 1 or 2, got {s}"))),
        }
        if self.setting == 1 {
            for &r in &self.ratios {
                let p = fraction_from_ratio(r);
                if !(p > 0.0 && p < 1.0) {
                    return Err(rule(format!("ratio {r} gives target fraction {p} outside (0, 1)")));
                }
            }
        }
        Ok(())
    }

    fn aipw_checks(&self) -> Result<()> {
        if self.aipw.folds < 2 {
            return Err(rule("aipw.folds must be at least 2"));
        }
        if !(self.aipw.ridge_penalty > 0.0 && self.aipw.logistic_penalty > 0.0) {
            return Err(rule("AIPW penalties must be positive"));
        }
        if !(self.aipw.propensity_clip > 0.0 && self.aipw.propensity_clip < 0.5) {
            return Err(rule("aipw.propensity_clip must lie in (0, 0.5)"));
        }
        Ok(())
    }

    /// Runs per (method, ratio) cell.
    pub fn repetitions(&self) -> usize {
        self.b_d * self.b_m
    }

    pub fn n_runs(&self) -> usize {
        self.repetitions() * self.ratios.len() * self.methods.len()
    }
}
