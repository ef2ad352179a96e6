use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::linalg::cholesky_solve;
use super::PredictError;

/// Linear model `x.w + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }
}

/// Ridge regression with an unpenalized intercept: minimizes
/// `|y - Xw - b|^2 + l2 |w|^2` by solving the centred normal equations
/// `(Xc'Xc + l2 I) w = Xc'yc`, then `b = mean(y) - mean(x).w`.
pub fn fit_ridge(x: ArrayView2<f64>, y: ArrayView1<f64>, l2: f64) -> Result<RidgeModel, PredictError> {
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(PredictError::LengthMismatch { left: n, right: y.len() });
    }
    if n == 0 {
        return Err(PredictError::Empty);
    }
    let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
    let y_mean = y.mean().expect("non-empty");
    let xc = &x - &x_mean;
    let yc = &y - y_mean;
    let mut gram = xc.t().dot(&xc);
    for k in 0..d {
        gram[[k, k]] += l2;
    }
    let weights = cholesky_solve(gram.view(), xc.t().dot(&yc).view())?;
    let intercept = y_mean - x_mean.dot(&weights);
    Ok(RidgeModel { weights, intercept })
}

/// `exp(-gamma |a_i - b_j|^2)` for all row pairs.
pub fn rbf_kernel(a: ArrayView2<f64>, b: ArrayView2<f64>, gamma: f64) -> Array2<f64> {
    let a_sq = a.map_axis(Axis(1), |r| r.dot(&r));
    let b_sq = b.map_axis(Axis(1), |r| r.dot(&r));
    let mut k = a.dot(&b.t());
    for ((i, j), v) in k.indexed_iter_mut() {
        let dist = (a_sq[i] + b_sq[j] - 2.0 * *v).max(0.0);
        *v = (-gamma * dist).exp();
    }
    k
}

/// RBF kernel ridge regression on mean-centred targets.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRidge {
    pub support: Array2<f64>,
    pub dual: Array1<f64>,
    pub offset: f64,
    pub gamma: f64,
}

impl KernelRidge {
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        rbf_kernel(x, self.support.view(), self.gamma).dot(&self.dual) + self.offset
    }
}

/// Solve `(K + l2 I) alpha = y - mean(y)`; predictions are
/// `mean(y) + k(x, X) alpha`.
pub fn fit_kernel_ridge(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    l2: f64,
    gamma: f64,
) -> Result<KernelRidge, PredictError> {
    let n = x.nrows();
    if n != y.len() {
        return Err(PredictError::LengthMismatch { left: n, right: y.len() });
    }
    if n == 0 {
        return Err(PredictError::Empty);
    }
    let offset = y.mean().expect("non-empty");
    let mut k = rbf_kernel(x, x, gamma);
    for i in 0..n {
        k[[i, i]] += l2;
    }
    let dual = cholesky_solve(k.view(), (&y - offset).view())?;
    Ok(KernelRidge {
        support: x.to_owned(),
        dual,
        offset,
        gamma,
    })
}
