use serde::Serialize;

use super::{PredictError, NUM_CLASSES};

/// Percentage of exact matches.
pub fn evaluate_classification(pred: &[u8], truth: &[u8]) -> Result<f64, PredictError> {
    if pred.len() != truth.len() {
        return Err(PredictError::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if truth.is_empty() {
        return Err(PredictError::Empty);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    /// `None` when either side is constant.
    pub rho: Option<f64>,
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, PredictError> {
    if a.len() != b.len() {
        return Err(PredictError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < 2 {
        return Err(PredictError::TooFewSamples { n: a.len(), min: 2 });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(PredictError::UndefinedCorrelation);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Mean absolute error and Pearson correlation.
pub fn evaluate_regression(pred: &[f64], truth: &[f64]) -> Result<RegressionMetrics, PredictError> {
    if pred.len() != truth.len() {
        return Err(PredictError::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if truth.len() < 2 {
        return Err(PredictError::TooFewSamples { n: truth.len(), min: 2 });
    }
    let mae = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / truth.len() as f64;
    let rho = match pearson(pred, truth) {
        Ok(r) => Some(r),
        Err(PredictError::UndefinedCorrelation) => None,
        Err(e) => return Err(e),
    };
    Ok(RegressionMetrics { mae, rho })
}

/// `m[i][j]` counts samples of class `i + 1` predicted as `j + 1`.
///
/// # Panics
/// On labels outside `1..=NUM_CLASSES`.
pub fn misclassification_matrix(pred: &[u8], truth: &[u8]) -> [[usize; NUM_CLASSES]; NUM_CLASSES] {
    debug_assert_eq!(pred.len(), truth.len());
    let mut m = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for (&p, &t) in pred.iter().zip(truth) {
        m[usize::from(t) - 1][usize::from(p) - 1] += 1;
    }
    m
}
