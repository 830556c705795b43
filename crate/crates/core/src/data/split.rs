//! Splitting one labeled dataset into a labeled target domain and an
//! unlabeled source domain.

use super::DomainDataset;
use crate::error::{Error, Result};
use crate::numeric::sampling::permutation;
use crate::numeric::RngStream;

/// Target/source ratio `n_t / n_s` implied by a target fraction.
pub fn ratio_from_fraction(p_t: f64) -> f64 {
    p_t / (1.0 - p_t)
}

/// Target fraction implied by a ratio `r = n_t / n_s`.
pub fn fraction_from_ratio(r: f64) -> f64 {
    r / (1.0 + r)
}

/// Random disjoint partition of `0..n`: `round(n * p_t)` target indices and
/// the rest as source, both ascending.
pub fn split_indices(n: usize, p_t: f64, rng: &mut RngStream) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(p_t > 0.0 && p_t < 1.0) {
        return Err(Error::InvalidInput(format!("target fraction must lie in (0, 1), got {p_t}")));
    }
    let n_target = (n as f64 * p_t).round() as usize;
    if n_target == 0 || n_target >= n {
        return Err(Error::InvalidInput(format!(
            "splitting {n} rows at fraction {p_t} leaves an empty domain"
        )));
    }
    let perm = permutation(n, rng);
    let mut target = perm[..n_target].to_vec();
    let mut source = perm[n_target..].to_vec();
    target.sort_unstable();
    source.sort_unstable();
    Ok((target, source))
}

/// Keeps labels on a random `p_t` share of rows and strips them from the rest.
pub fn split_setting1(
    dataset: &DomainDataset,
    p_t: f64,
    rng: &mut RngStream,
) -> Result<(DomainDataset, DomainDataset)> {
    if dataset.labels().is_none() {
        return Err(Error::InvalidInput("only a labeled dataset can be split".into()));
    }
    let (t_idx, s_idx) = split_indices(dataset.n_rows(), p_t, rng)?;
    let target = dataset.select_rows(&t_idx);
    let source = dataset.select_rows(&s_idx).into_source();
    Ok((target, source))
}
