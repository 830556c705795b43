//! GWAS-style semi-synthetic benchmark with a single binary SNP treatment.
//!
//! Pipeline:
//!
//! 1. Reference panel: a synthetic `panel_rows x V` matrix of
//!    `Uniform(0.05, 0.95)` allele frequencies, or a numeric CSV.
//! 2. Linkage pruning: greedy left-to-right removal of any column whose
//!    absolute Pearson correlation with an earlier kept column exceeds
//!    `ld_threshold`.
//! 3. `S`: the top `L` principal components of the panel plus a row of ones.
//! 4. `Gamma`: `J x (L + 1)` with `0.9 * Uniform(0, 0.5)` entries and a
//!    constant last column (`gamma_intercept`).
//! 5. Allele frequencies `F = Gamma S`, clipped to
//!    `[freq_clip, 1 - freq_clip]`, and genotypes `X ~ Binomial(1, F)`.
//! 6. One non-constant column `v` is the treatment, with effect
//!    `tau_v ~ Normal(0, tau_sd)`; every other coefficient is zero.
//! 7. Confounding: k-means clusters of `X` get intercepts `gamma_c ~ N(0, 1)`
//!    and noise scales `sigma_c ~ InvGamma(3, 1)`; noise is
//!    `eps_j ~ N(0, sigma_{c_j})`.
//! 8. Intercepts and noise are rescaled so their variances stand to the
//!    gene term's as `v_group : v_gene` and `v_noise : v_gene`, then
//!    `Y = tau_v X_v + gamma_{c_j} + eps_j`.

use std::path::PathBuf;

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DomainDataset, GroundTruth};
use crate::error::{Error, Result};
use crate::numeric::kernels::sample_sd;
use crate::numeric::sampling::{sample_inv_gamma, sample_normal, sample_uniform, standard_normal};
use crate::numeric::{kmeans, pca_fit, Matrix, RngStream};

const PANEL_LOW: f64 = 0.05;
const PANEL_HIGH: f64 = 0.95;
const GAMMA_SCALE: f64 = 0.9;
const GAMMA_UPPER: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwasConfig {
    /// J
    pub n_samples: usize,
    /// V, before linkage pruning.
    pub n_snps: usize,
    /// L
    pub n_components: usize,
    pub gamma_intercept: f64,
    pub tau_sd: f64,
    pub n_clusters: usize,
    pub inv_gamma_shape: f64,
    pub inv_gamma_scale: f64,
    pub v_gene: f64,
    pub v_group: f64,
    pub v_noise: f64,
    pub freq_clip: f64,
    pub panel_rows: usize,
    /// `None` disables linkage pruning.
    pub ld_threshold: Option<f64>,
    pub reference_panel_path: Option<PathBuf>,
    pub seed: u64,
}

impl Default for GwasConfig {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            n_snps: 10_000,
            n_components: 3,
            gamma_intercept: 0.05,
            tau_sd: 0.5,
            n_clusters: 3,
            inv_gamma_shape: 3.0,
            inv_gamma_scale: 1.0,
            v_gene: 0.4,
            v_group: 0.4,
            v_noise: 0.2,
            freq_clip: 0.01,
            panel_rows: 200,
            ld_threshold: Some(0.95),
            reference_panel_path: None,
            seed: 0,
        }
    }
}

impl GwasConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_samples < 10 {
            return bad(format!("n_samples must be at least 10, got {}", self.n_samples));
        }
        if self.n_snps < 2 {
            return bad(format!("n_snps must be at least 2, got {}", self.n_snps));
        }
        if self.n_components == 0 || self.n_components > self.n_snps {
            return bad(format!(
                "n_components must lie in [1, n_snps], got {}",
                self.n_components
            ));
        }
        if self.n_clusters == 0 || self.n_clusters > self.n_samples {
            return bad(format!("n_clusters must lie in [1, n_samples], got {}", self.n_clusters));
        }
        for (name, v) in [
            ("v_gene", self.v_gene),
            ("v_group", self.v_group),
            ("v_noise", self.v_noise),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        let total = self.v_gene + self.v_group + self.v_noise;
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("variance fractions must sum to 1, got {total}"));
        }
        if !(self.freq_clip > 0.0 && self.freq_clip < 0.5) {
            return bad(format!("freq_clip must lie in (0, 0.5), got {}", self.freq_clip));
        }
        if !(self.tau_sd > 0.0) {
            return bad(format!("tau_sd must be positive, got {}", self.tau_sd));
        }
        if !(self.inv_gamma_shape > 0.0 && self.inv_gamma_scale > 0.0) {
            return bad("inverse-gamma parameters must be positive".into());
        }
        if let Some(t) = self.ld_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("ld_threshold must lie in (0, 1], got {t}"));
            }
        }
        if self.reference_panel_path.is_none() && self.panel_rows < 2 {
            return bad(format!("panel_rows must be at least 2, got {}", self.panel_rows));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GwasDataset {
    /// Covariates are the genotypes minus the treatment column.
    pub target: DomainDataset,
    /// Per-SNP effects over the kept SNPs; exactly one is non-zero.
    pub coefficients: Vec<f64>,
    /// Index of the treatment SNP among the kept SNPs.
    pub treatment_column: usize,
    /// Indices (into the original panel) of the SNPs removed by pruning.
    pub pruned_columns: Vec<usize>,
    pub clusters: Vec<usize>,
    pub gene_term: Vec<f64>,
    pub group_term: Vec<f64>,
    pub noise_term: Vec<f64>,
}

impl GwasDataset {
    /// Variance of each outcome component divided by the outcome variance,
    /// in (gene, group, noise) order.
    pub fn variance_shares(&self) -> (f64, f64, f64) {
        let var = |v: &[f64]| sample_sd(v).powi(2);
        let y = self.target.outcomes().expect("GWAS target is labeled");
        let total = var(y);
        (
            var(&self.gene_term) / total,
            var(&self.group_term) / total,
            var(&self.noise_term) / total,
        )
    }
}

pub fn simulate_gwas(config: &GwasConfig, rng: &RngStream) -> Result<GwasDataset> {
    config.validate()?;
    let j = config.n_samples;

    let panel = match &config.reference_panel_path {
        Some(path) => {
            let panel = read_panel(path)?;
            if panel.ncols() != config.n_snps {
                return Err(Error::InvalidConfig(format!(
                    "reference panel has {} SNP columns but n_snps is {}",
                    panel.ncols(),
                    config.n_snps
                )));
            }
            panel
        }
        None => {
            let mut r = rng.derive(1);
            Array2::from_shape_simple_fn((config.panel_rows, config.n_snps), || {
                sample_uniform(PANEL_LOW, PANEL_HIGH, &mut r)
            })
        }
    };

    let (kept, pruned_columns) = match config.ld_threshold {
        Some(t) => ld_prune(&panel, t),
        None => ((0..panel.ncols()).collect(), Vec::new()),
    };
    let panel = panel.select(Axis(1), &kept);
    let v = panel.ncols();
    if v < 2 || config.n_components > v {
        return Err(Error::InvalidInput(format!(
            "only {v} SNPs survive linkage pruning; need at least max(2, n_components)"
        )));
    }

    let l = config.n_components;
    let pca = pca_fit(&panel, l)?;
    let mut structure = Array2::<f64>::ones((l + 1, v));
    structure.slice_mut(s![..l, ..]).assign(&pca.components);

    let mut r = rng.derive(2);
    let mut mixing = Array2::<f64>::from_elem((j, l + 1), config.gamma_intercept);
    for row in 0..j {
        for d in 0..l {
            mixing[[row, d]] = GAMMA_SCALE * sample_uniform(0.0, GAMMA_UPPER, &mut r);
        }
    }

    let lo = config.freq_clip;
    let freqs = mixing.dot(&structure).mapv(|f| f.clamp(lo, 1.0 - lo));

    let mut r = rng.derive(3);
    let genotypes: Matrix = freqs.mapv(|f| if r.random::<f64>() < f { 1.0 } else { 0.0 });

    let candidates: Vec<usize> = (0..v)
        .filter(|&c| {
            let col = genotypes.column(c);
            col.iter().any(|&x| x == 1.0) && col.iter().any(|&x| x == 0.0)
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidInput(
            "every simulated SNP is constant; no column can serve as treatment".into(),
        ));
    }
    let mut r = rng.derive(4);
    let treatment_column = candidates[r.random_range(0..candidates.len())];
    let tau = loop {
        let t = sample_normal(0.0, config.tau_sd, &mut r)?;
        if t != 0.0 {
            break t;
        }
    };
    let mut coefficients = vec![0.0; v];
    coefficients[treatment_column] = tau;

    let mut r = rng.derive(5);
    let clusters = kmeans(&genotypes, config.n_clusters, &mut r)?.assignments;

    let mut r = rng.derive(6);
    let intercepts: Vec<f64> = (0..config.n_clusters).map(|_| standard_normal(&mut r)).collect();
    let scales = (0..config.n_clusters)
        .map(|_| sample_inv_gamma(config.inv_gamma_shape, config.inv_gamma_scale, &mut r))
        .collect::<Result<Vec<f64>>>()?;

    let mut r = rng.derive(7);
    let treatment: Vec<f64> = genotypes.column(treatment_column).to_vec();
    let gene_term: Vec<f64> = treatment.iter().map(|&x| tau * x).collect();
    let mut group_term: Vec<f64> = clusters.iter().map(|&c| intercepts[c]).collect();
    let mut noise_term: Vec<f64> = clusters
        .iter()
        .map(|&c| scales[c] * standard_normal(&mut r))
        .collect();

    let gene_scale = sample_sd(&gene_term) / config.v_gene.sqrt();
    rescale(&mut group_term, gene_scale * config.v_group.sqrt(), "group intercept")?;
    rescale(&mut noise_term, gene_scale * config.v_noise.sqrt(), "noise")?;

    let outcomes: Vec<f64> = (0..j)
        .map(|i| gene_term[i] + group_term[i] + noise_term[i])
        .collect();

    let keep_cols: Vec<usize> = (0..v).filter(|&c| c != treatment_column).collect();
    let covariates = genotypes.select(Axis(1), &keep_cols);
    let target = DomainDataset::target(covariates, treatment, outcomes)?
        .with_ground_truth(GroundTruth::scalar(tau));

    Ok(GwasDataset {
        target,
        coefficients,
        treatment_column,
        pruned_columns,
        clusters,
        gene_term,
        group_term,
        noise_term,
    })
}

fn rescale(values: &mut [f64], target_sd: f64, what: &str) -> Result<()> {
    let sd = sample_sd(values);
    if !(sd > 0.0) {
        return Err(Error::InvalidInput(format!(
            "{what} term has zero variance and cannot be rescaled"
        )));
    }
    let factor = target_sd / sd;
    values.iter_mut().for_each(|x| *x *= factor);
    Ok(())
}

/// Greedy linkage pruning. Returns (kept, removed) column indices.
pub fn ld_prune(panel: &Matrix, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    const BLOCK: usize = 256;
    let v = panel.ncols();
    let means: Array1<f64> = panel.mean_axis(Axis(0)).expect("panel has rows");
    let mut z = panel - &means;
    for mut col in z.columns_mut() {
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 {
            col /= norm;
        }
    }

    let mut removed = vec![false; v];
    let mut start = 0;
    while start < v {
        let end = (start + BLOCK).min(v);
        let corr = z.slice(s![.., start..end]).t().dot(&z.slice(s![.., start..]));
        for a in start..end {
            if removed[a] {
                continue;
            }
            let row = corr.row(a - start);
            for b in (a + 1)..v {
                if !removed[b] && row[b - start].abs() > threshold {
                    removed[b] = true;
                }
            }
        }
        start = end;
    }
    let kept = (0..v).filter(|&c| !removed[c]).collect();
    let gone = (0..v).filter(|&c| removed[c]).collect();
    (kept, gone)
}

fn read_panel(path: &std::path::Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) => rows.push(r),
            // A non-numeric first line is a header.
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    column: format!("line {}", i + 1),
                    problem: format!("is not numeric ({e})"),
                })
            }
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.len() < 2 || cols < 2 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidInput(format!(
            "reference panel {} must be a rectangular numeric matrix with at least 2 rows and columns",
            path.display()
        )));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((flat.len() / cols, cols), flat).map_err(|e| Error::Shape(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GwasConfig {
        GwasConfig {
            n_samples: 120,
            n_snps: 60,
            ..GwasConfig::default()
        }
    }

    #[test]
    fn shapes_and_single_effect() {
        let g = simulate_gwas(&small(), &RngStream::new(1)).unwrap();
        assert_eq!(g.target.n_rows(), 120);
        assert_eq!(g.target.n_features(), 60 - 1 - g.pruned_columns.len());
        assert_eq!(g.coefficients.iter().filter(|&&c| c != 0.0).count(), 1);
        assert_eq!(g.target.ground_truth.as_ref().unwrap().true_ate, g.coefficients[g.treatment_column]);
    }

    #[test]
    fn outcome_is_additive_and_genotypes_binary() {
        let g = simulate_gwas(&small(), &RngStream::new(2)).unwrap();
        let y = g.target.outcomes().unwrap();
        for i in 0..y.len() {
            let sum = g.gene_term[i] + g.group_term[i] + g.noise_term[i];
            assert!((y[i] - sum).abs() <= 1e-12);
        }
        assert!(g.target.covariates.iter().all(|&x| x == 0.0 || x == 1.0));
        assert!(g.target.treatments().unwrap().iter().all(|&x| x == 0.0 || x == 1.0));
    }

    #[test]
    fn rescaled_components_have_target_variance_ratios() {
        let g = simulate_gwas(&small(), &RngStream::new(3)).unwrap();
        let var = |v: &[f64]| sample_sd(v).powi(2);
        let gene = var(&g.gene_term);
        assert!((var(&g.group_term) / gene - 1.0).abs() < 1e-9);
        assert!((var(&g.noise_term) / gene - 0.5).abs() < 1e-9);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = simulate_gwas(&small(), &RngStream::new(7)).unwrap();
        let b = simulate_gwas(&small(), &RngStream::new(7)).unwrap();
        assert_eq!(a.target, b.target);
        let c = simulate_gwas(&small(), &RngStream::new(8)).unwrap();
        assert_ne!(a.target.outcomes(), c.target.outcomes());
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = small();
        c.v_noise = 0.3;
        assert!(simulate_gwas(&c, &RngStream::new(0)).is_err());
        let mut c = small();
        c.n_samples = 5;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn ld_prune_drops_correlated_duplicates() {
        let mut r = RngStream::new(0);
        let mut panel = Array2::from_shape_simple_fn((50, 6), || sample_uniform(0.0, 1.0, &mut r));
        let c0 = panel.column(0).to_owned();
        panel.column_mut(3).assign(&(&c0 * 2.0 + 0.1));
        let (kept, gone) = ld_prune(&panel, 0.95);
        assert_eq!(gone, vec![3]);
        assert_eq!(kept, vec![0, 1, 2, 4, 5]);
    }
}
