//! L2-penalized logistic and ridge regression with unpenalized intercepts.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::numeric::sigmoid;

const MAX_NEWTON: usize = 100;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn decision(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: LinearModel,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl LogisticFit {
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        self.model.decision(x).mapv(sigmoid)
    }
}

fn to_dmatrix(x: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

fn log1pexp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Minimizes `sum_i logloss_i + (penalty / 2) |w|^2` by damped Newton steps,
/// stopping once the gradient norm falls below [`GRADIENT_TOLERANCE`].
pub fn fit_logistic(x: ArrayView2<'_, f64>, t: ArrayView1<'_, f64>, penalty: f64) -> Result<LogisticFit> {
    let (n, p) = x.dim();
    if t.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} labels", t.len())));
    }
    if !(penalty > 0.0) {
        return Err(Error::InvalidConfig("logistic penalty must be positive".into()));
    }
    // Column 0 is the intercept.
    let mut xa = DMatrix::<f64>::from_element(n, p + 1, 1.0);
    xa.view_mut((0, 1), (n, p)).copy_from(&to_dmatrix(x));
    let tv = DVector::from_iterator(n, t.iter().copied());
    let mut reg = DVector::from_element(p + 1, penalty);
    reg[0] = 0.0;

    let objective = |beta: &DVector<f64>| -> f64 {
        let z = &xa * beta;
        let mut s = 0.0;
        for i in 0..n {
            s += log1pexp(z[i]) - tv[i] * z[i];
        }
        s + 0.5 * beta.component_mul(&reg).dot(beta)
    };

    let mut beta = DVector::<f64>::zeros(p + 1);
    let mut f = objective(&beta);
    let mut gnorm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_NEWTON {
        let z = &xa * &beta;
        let prob = z.map(sigmoid);
        let grad = xa.tr_mul(&(&prob - &tv)) + beta.component_mul(&reg);
        gnorm = grad.norm();
        if gnorm < GRADIENT_TOLERANCE {
            break;
        }
        let w = prob.map(|q| (q * (1.0 - q)).max(1e-12));
        let mut xw = xa.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let mut h = xa.tr_mul(&xw);
        for k in 0..=p {
            // The tiny ridge on the intercept keeps separable data solvable.
            h[(k, k)] += reg[k].max(1e-10);
        }
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::Numerical("logistic Hessian is not positive definite".into()))?;
        let step = chol.solve(&grad);
        let mut alpha = 1.0;
        loop {
            let candidate = &beta - &step * alpha;
            let fc = objective(&candidate);
            if fc <= f || alpha < 1e-10 {
                beta = candidate;
                f = fc;
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
    }
    Ok(LogisticFit {
        model: LinearModel {
            weights: Array1::from_iter(beta.iter().skip(1).copied()),
            intercept: beta[0],
        },
        iterations,
        gradient_norm: gnorm,
    })
}

/// Minimizes `|y - b - X w|^2 + penalty |w|^2`. Uses the `p x p` normal
/// equations when `p <= n` and the `n x n` dual system otherwise.
pub fn fit_ridge(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, penalty: f64) -> Result<LinearModel> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} targets", y.len())));
    }
    if n == 0 {
        return Err(Error::InvalidInput("ridge regression on zero rows".into()));
    }
    if !(penalty > 0.0) {
        return Err(Error::InvalidConfig("ridge penalty must be positive".into()));
    }
    let x_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let y_mean = y.mean().expect("n > 0");
    let xc = to_dmatrix((&x - &x_mean).view());
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let singular = || Error::Numerical("ridge system is not positive definite".into());

    let w = if p <= n {
        let mut a = xc.tr_mul(&xc);
        for k in 0..p {
            a[(k, k)] += penalty;
        }
        a.cholesky().ok_or_else(singular)?.solve(&xc.tr_mul(&yc))
    } else {
        let mut k = &xc * xc.transpose();
        for i in 0..n {
            k[(i, i)] += penalty;
        }
        let alpha = k.cholesky().ok_or_else(singular)?.solve(&yc);
        xc.tr_mul(&alpha)
    };
    let weights = Array1::from_iter(w.iter().copied());
    let intercept = y_mean - x_mean.dot(&weights);
    Ok(LinearModel { weights, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn ridge_primal_and_dual_agree() {
        let x = Array2::from_shape_fn((5, 8), |(i, j)| ((i * 8 + j) as f64 * 0.7).sin());
        let y = Array1::from_shape_fn(5, |i| i as f64 - 1.0);
        let dual = fit_ridge(x.view(), y.view(), 0.5).unwrap();
        // Primal on the same problem, forced by solving the p x p system directly.
        let xm = x.mean_axis(Axis(0)).unwrap();
        let xc = to_dmatrix((&x - &xm).view());
        let yc = DVector::from_iterator(5, y.iter().map(|v| v - y.mean().unwrap()));
        let mut a = xc.tr_mul(&xc);
        for k in 0..8 {
            a[(k, k)] += 0.5;
        }
        let w = a.cholesky().unwrap().solve(&xc.tr_mul(&yc));
        for k in 0..8 {
            assert!((w[k] - dual.weights[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn ridge_recovers_a_line_with_small_penalty() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = array![1.0, 3.0, 5.0, 7.0];
        let m = fit_ridge(x.view(), y.view(), 1e-9).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-6);
        assert!((m.intercept - 1.0).abs() < 1e-6);
    }

    #[test]
    fn logistic_converges() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 3 + j * 7) as f64 * 0.37).sin());
        let t = Array1::from_shape_fn(40, |i| if x[[i, 0]] + 0.3 * ((i as f64).cos()) > 0.0 { 1.0 } else { 0.0 });
        let fit = fit_logistic(x.view(), t.view(), 1.0).unwrap();
        assert!(fit.gradient_norm < GRADIENT_TOLERANCE, "{}", fit.gradient_norm);
        assert!(fit.model.weights[0] > 0.0);
    }

    #[test]
    fn balanced_intercept_only() {
        let x = Array2::zeros((4, 1));
        let t = array![1.0, 0.0, 1.0, 0.0];
        let fit = fit_logistic(x.view(), t.view(), 1.0).unwrap();
        assert!(fit.model.intercept.abs() < 1e-9);
        assert!(fit.predict_proba(x.view()).iter().all(|&p| (p - 0.5).abs() < 1e-9));
    }
}
