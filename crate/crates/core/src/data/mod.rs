//! Datasets, benchmark generators and the target/source combination.
//!
//! A [`DomainDataset`] is either a labeled target domain (covariates,
//! treatment, outcome) or an unlabeled source domain (covariates only).
//! [`combine_domains`] stacks the two into a [`CombinedDataset`] whose label
//! columns are masked on source rows.

pub mod export;
pub mod gwas;
pub mod hcmnist;
pub mod ihdp;
pub mod mnist;
pub mod split;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Matrix;

pub use export::{read_domain_csv, write_domain_csv, write_sidecar};
pub use gwas::{simulate_gwas, GwasConfig, GwasDataset};
pub use hcmnist::{compute_phi, generate_hcmnist, HcmnistConfig, HcmnistDataset, PhiMap};
pub use ihdp::load_ihdp;
pub use mnist::{load_idx, load_mnist_dir, ImageSet};
pub use split::{split_indices, split_setting1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    /// The `D` indicator: 1 for target rows, 0 for source rows.
    pub fn flag(self) -> u8 {
        match self {
            Domain::Target => 1,
            Domain::Source => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    /// Binary treatment, stored as 0.0 / 1.0.
    pub treatments: Vec<f64>,
    pub outcomes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub true_ate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu1: Option<Vec<f64>>,
}

impl GroundTruth {
    pub fn scalar(true_ate: f64) -> Self {
        Self {
            true_ate,
            mu0: None,
            mu1: None,
        }
    }

    /// Ground truth from per-sample potential outcomes; the ATE is their mean difference.
    pub fn from_potentials(mu0: Vec<f64>, mu1: Vec<f64>) -> Result<Self> {
        if mu0.len() != mu1.len() || mu0.is_empty() {
            return Err(Error::Shape(format!(
                "potential outcome vectors have lengths {} and {}",
                mu0.len(),
                mu1.len()
            )));
        }
        let true_ate = mu1.iter().zip(&mu0).map(|(a, b)| a - b).sum::<f64>() / mu0.len() as f64;
        Ok(Self {
            true_ate,
            mu0: Some(mu0),
            mu1: Some(mu1),
        })
    }

    fn subset(&self, rows: &[usize]) -> Self {
        let pick = |v: &Option<Vec<f64>>| v.as_ref().map(|v| rows.iter().map(|&i| v[i]).collect());
        match (pick(&self.mu0), pick(&self.mu1)) {
            (Some(mu0), Some(mu1)) => {
                GroundTruth::from_potentials(mu0, mu1).unwrap_or_else(|_| self.clone())
            }
            _ => self.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub covariates: Matrix,
    labels: Option<Labels>,
    domain: Domain,
    pub ground_truth: Option<GroundTruth>,
}

impl DomainDataset {
    pub fn target(covariates: Matrix, treatments: Vec<f64>, outcomes: Vec<f64>) -> Result<Self> {
        let n = covariates.nrows();
        if treatments.len() != n || outcomes.len() != n {
            return Err(Error::Shape(format!(
                "{n} covariate rows but {} treatments and {} outcomes",
                treatments.len(),
                outcomes.len()
            )));
        }
        if let Some(bad) = treatments.iter().find(|&&t| t != 0.0 && t != 1.0) {
            return Err(Error::InvalidInput(format!("treatment must be 0 or 1, found {bad}")));
        }
        Ok(Self {
            covariates,
            labels: Some(Labels {
                treatments,
                outcomes,
            }),
            domain: Domain::Target,
            ground_truth: None,
        })
    }

    pub fn source(covariates: Matrix) -> Self {
        Self {
            covariates,
            labels: None,
            domain: Domain::Source,
            ground_truth: None,
        }
    }

    pub fn with_ground_truth(mut self, truth: GroundTruth) -> Self {
        self.ground_truth = Some(truth);
        self
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn n_rows(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn treatments(&self) -> Option<&[f64]> {
        self.labels.as_ref().map(|l| l.treatments.as_slice())
    }

    pub fn outcomes(&self) -> Option<&[f64]> {
        self.labels.as_ref().map(|l| l.outcomes.as_slice())
    }

    /// Rows `rows` as a new dataset of the same domain. Per-sample ground
    /// truth is restricted to the selected rows.
    pub fn select_rows(&self, rows: &[usize]) -> DomainDataset {
        let covariates = self.covariates.select(Axis(0), rows);
        let labels = self.labels.as_ref().map(|l| Labels {
            treatments: rows.iter().map(|&i| l.treatments[i]).collect(),
            outcomes: rows.iter().map(|&i| l.outcomes[i]).collect(),
        });
        DomainDataset {
            covariates,
            labels,
            domain: self.domain,
            ground_truth: self.ground_truth.as_ref().map(|g| g.subset(rows)),
        }
    }

    /// Same covariates with labels dropped and the domain set to source.
    pub fn into_source(self) -> DomainDataset {
        DomainDataset::source(self.covariates)
    }

    /// Number of (treated, control) rows; `None` on an unlabeled dataset.
    pub fn arm_counts(&self) -> Option<(usize, usize)> {
        self.treatments().map(|t| {
            let treated = t.iter().filter(|&&v| v == 1.0).count();
            (treated, t.len() - treated)
        })
    }
}

/// Target rows followed by source rows, with a `D` flag per row and label
/// columns readable only where the label mask is set.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedDataset {
    pub covariates: Matrix,
    domain_flags: Vec<f64>,
    treatments: Vec<f64>,
    outcomes: Vec<f64>,
    label_mask: Vec<bool>,
    n_target: usize,
}

/// Stacks `target` over `source`. Both must share the same covariate
/// dimension.
pub fn combine_domains(target: &DomainDataset, source: &DomainDataset) -> Result<CombinedDataset> {
    let labels = target.labels().ok_or_else(|| {
        Error::InvalidInput("the target domain must carry treatments and outcomes".into())
    })?;
    if source.labels().is_some() {
        return Err(Error::InvalidInput("the source domain must be unlabeled".into()));
    }
    let n_t = target.n_rows();
    let n_s = source.n_rows();
    let covariates = if n_s == 0 {
        target.covariates.clone()
    } else {
        if target.n_features() != source.n_features() {
            return Err(Error::FeatureSpace {
                target_dim: target.n_features(),
                source_dim: source.n_features(),
            });
        }
        concatenate(Axis(0), &[target.covariates.view(), source.covariates.view()])
            .map_err(|e| Error::Shape(e.to_string()))?
    };

    let mut domain_flags = vec![1.0; n_t];
    domain_flags.resize(n_t + n_s, 0.0);
    let mut treatments = labels.treatments.clone();
    treatments.resize(n_t + n_s, f64::NAN);
    let mut outcomes = labels.outcomes.clone();
    outcomes.resize(n_t + n_s, f64::NAN);
    let mut label_mask = vec![true; n_t];
    label_mask.resize(n_t + n_s, false);

    Ok(CombinedDataset {
        covariates,
        domain_flags,
        treatments,
        outcomes,
        label_mask,
        n_target: n_t,
    })
}

impl CombinedDataset {
    /// A combined dataset with no source rows.
    pub fn target_only(target: &DomainDataset) -> Result<Self> {
        let empty = DomainDataset::source(Array2::zeros((0, target.n_features())));
        combine_domains(target, &empty)
    }

    pub fn n_rows(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn n_source(&self) -> usize {
        self.n_rows() - self.n_target
    }

    pub fn n_features(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn domain_flags(&self) -> &[f64] {
        &self.domain_flags
    }

    pub fn label_mask(&self) -> &[bool] {
        &self.label_mask
    }

    /// Raw treatment column; entries where the mask is unset are NaN placeholders.
    pub fn treatment_storage(&self) -> &[f64] {
        &self.treatments
    }

    /// Raw outcome column; entries where the mask is unset are NaN placeholders.
    pub fn outcome_storage(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn treatment(&self, row: usize) -> Result<f64> {
        self.checked(row).map(|_| self.treatments[row])
    }

    pub fn outcome(&self, row: usize) -> Result<f64> {
        self.checked(row).map(|_| self.outcomes[row])
    }

    fn checked(&self, row: usize) -> Result<()> {
        match self.label_mask.get(row) {
            Some(true) => Ok(()),
            Some(false) => Err(Error::MaskedLabel { row }),
            None => Err(Error::InvalidInput(format!(
                "row {row} out of range for {} rows",
                self.n_rows()
            ))),
        }
    }

    /// Covariates of the target rows.
    pub fn target_covariates(&self) -> ndarray::ArrayView2<'_, f64> {
        self.covariates.slice(ndarray::s![..self.n_target, ..])
    }

    /// Treatment and outcome vectors over the target rows only.
    pub fn target_labels(&self) -> (&[f64], &[f64]) {
        (&self.treatments[..self.n_target], &self.outcomes[..self.n_target])
    }

    /// Rows `rows` as a new combined dataset, target rows first. Rows keep
    /// their domain.
    pub fn select_rows(&self, rows: &[usize]) -> CombinedDataset {
        let mut ordered: Vec<usize> = rows.iter().copied().filter(|&r| self.label_mask[r]).collect();
        let n_target = ordered.len();
        ordered.extend(rows.iter().copied().filter(|&r| !self.label_mask[r]));
        CombinedDataset {
            covariates: self.covariates.select(Axis(0), &ordered),
            domain_flags: ordered.iter().map(|&r| self.domain_flags[r]).collect(),
            treatments: ordered.iter().map(|&r| self.treatments[r]).collect(),
            outcomes: ordered.iter().map(|&r| self.outcomes[r]).collect(),
            label_mask: ordered.iter().map(|&r| self.label_mask[r]).collect(),
            n_target,
        }
    }

    /// Mutable access to the label storage of every row, including masked
    /// ones. Exists so callers can verify that masked entries are never read.
    #[doc(hidden)]
    pub fn label_storage_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.treatments, &mut self.outcomes)
    }
}
