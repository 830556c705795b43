//! Principal component analysis by eigendecomposition of the covariance.
//!
//! When there are fewer rows than columns the decomposition runs on the
//! `J x J` Gram matrix of the centered data instead of the `V x V`
//! covariance; both share their non-zero spectrum and the components are
//! recovered as `A^T u / sqrt((J - 1) lambda)`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};

use super::Matrix;
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Pca {
    /// `L x V`, orthonormal rows, descending explained variance.
    pub components: Matrix,
    pub column_means: Array1<f64>,
    pub explained_variance: Array1<f64>,
}

pub fn pca_fit(data: &Matrix, n_components: usize) -> Result<Pca> {
    let (rows, cols) = data.dim();
    if rows < 2 {
        return Err(Error::InvalidInput(format!("PCA needs at least 2 rows, got {rows}")));
    }
    if n_components == 0 || n_components > rows.min(cols) {
        return Err(Error::InvalidInput(format!(
            "cannot extract {n_components} components from a {rows}x{cols} matrix"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("PCA input contains non-finite values".into()));
    }

    let column_means = data.mean_axis(Axis(0)).expect("rows >= 2");
    let centered = data - &column_means;
    let denom = (rows - 1) as f64;
    let use_gram = rows < cols;

    let small = if use_gram {
        centered.dot(&centered.t()) / denom
    } else {
        centered.t().dot(&centered) / denom
    };
    let (values, vectors) = symmetric_eigen_desc(&small);

    let largest = values.first().copied().unwrap_or(0.0).max(0.0);
    let rank = if largest > 0.0 {
        values.iter().filter(|&&v| v > largest * RANK_TOLERANCE).count()
    } else {
        0
    };
    if rank < n_components {
        return Err(Error::RankDeficient {
            rank,
            requested: n_components,
        });
    }

    let mut components = Array2::<f64>::zeros((n_components, cols));
    for k in 0..n_components {
        let u = vectors.column(k);
        let mut row = if use_gram {
            let scaled = centered.t().dot(&u);
            let norm = (denom * values[k]).sqrt();
            scaled / norm
        } else {
            u.to_owned()
        };
        // Renormalize against round-off, then fix the sign so the entry of
        // largest magnitude is positive.
        let norm = row.dot(&row).sqrt();
        row /= norm;
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            row.mapv_inplace(|v| -v);
        }
        components.row_mut(k).assign(&row);
    }

    Ok(Pca {
        components,
        column_means,
        explained_variance: Array1::from(values[..n_components].to_vec()),
    })
}

impl Pca {
    /// Scores of `data` on the retained components (`n x L`).
    pub fn transform(&self, data: &Matrix) -> Matrix {
        (data - &self.column_means).dot(&self.components.t())
    }

    /// Maps scores back to the original space, re-adding the column means.
    pub fn inverse_transform(&self, scores: &Matrix) -> Matrix {
        scores.dot(&self.components) + &self.column_means
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending; vectors as columns.
fn symmetric_eigen_desc(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[[i, j]] + m[[j, i]]));
    let eig = SymmetricEigen::new(dm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}
