//! Lloyd's k-means with k-means++ seeding.
//!
//! Iterates until the assignment vector stops changing or
//! [`MAX_ITERATIONS`] is reached. A cluster that loses all its points is
//! re-seeded at the point farthest from its current centroid, so the call
//! never fails on an empty cluster.

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use super::{Matrix, RngStream};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    /// Within-cluster sum of squares of the final assignment.
    pub inertia: f64,
    pub iterations: usize,
    /// Objective after every assignment step, in order.
    pub objective_trace: Vec<f64>,
}

pub fn kmeans(data: &Matrix, k: usize, rng: &mut RngStream) -> Result<KMeans> {
    let (n, p) = data.dim();
    if k == 0 || n < k {
        return Err(Error::InvalidInput(format!(
            "k-means needs n >= k >= 1, got n={n}, k={k}"
        )));
    }

    let mut centroids = seed_plus_plus(data, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut distances = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        let mut changed = false;
        for (i, row) in data.rows().into_iter().enumerate() {
            let (best, d) = nearest(&centroids, row);
            distances[i] = d;
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        trace.push(distances.iter().sum());
        iterations += 1;
        if !changed || iterations >= MAX_ITERATIONS {
            break;
        }

        let mut sums = Array2::<f64>::zeros((k, p));
        let mut counts = vec![0usize; k];
        for (i, row) in data.rows().into_iter().enumerate() {
            let c = assignments[i];
            counts[c] += 1;
            sums.row_mut(c).scaled_add(1.0, &row);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).assign(&mean);
            } else {
                // Re-seed from the point worst served by its centroid, then
                // mark it so a second empty cluster picks a different one.
                let far = farthest(&distances);
                centroids.row_mut(c).assign(&data.row(far));
                distances[far] = -1.0;
            }
        }
    }

    let inertia = data
        .rows()
        .into_iter()
        .zip(&assignments)
        .map(|(row, &c)| sq_dist(row, centroids.row(c)))
        .sum();

    Ok(KMeans {
        assignments,
        centroids,
        inertia,
        iterations,
        objective_trace: trace,
    })
}

fn seed_plus_plus(data: &Matrix, k: usize, rng: &mut RngStream) -> Matrix {
    let (n, p) = data.dim();
    let mut centroids = Array2::<f64>::zeros((k, p));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&data.row(first));
    let mut best: Vec<f64> = data
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, centroids.row(0)))
        .collect();

    for c in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in best.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&data.row(pick));
        for (i, row) in data.rows().into_iter().enumerate() {
            best[i] = best[i].min(sq_dist(row, centroids.row(c)));
        }
    }
    centroids
}

fn nearest(centroids: &Matrix, row: ArrayView1<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn farthest(distances: &[f64]) -> usize {
    let mut idx = 0;
    for (i, &d) in distances.iter().enumerate() {
        if d > distances[idx] {
            idx = i;
        }
    }
    idx
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}
