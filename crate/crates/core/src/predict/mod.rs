//! Downstream prediction of vertex labels from feature vectors.
//!
//! Occupational class is a 9-way one-vs-all logistic regression; income is a
//! ridge regression (or RBF kernel ridge). Both are scored under nested
//! cross-validation with accuracy, or with mean absolute error and Pearson
//! correlation.

mod cv;
mod dataset;
mod linalg;
mod logistic;
mod metrics;
mod ridge;

use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::parse::ParseError;

pub use cv::{
    default_grid, nested_cv, nested_cv_views, Aggregate, EvalReport, FoldPlan, FoldResult, GridChoice, Learner,
    LearnerKind,
};
pub use dataset::{concat_features, FeatureMatrix, LabelRow, LabeledDataset, Labels, TaskData, Targets};
pub use linalg::{cholesky_solve, Standardizer};
pub use logistic::{fit_logreg_ova, BinaryLogistic, OvaClassifier};
pub use metrics::{evaluate_classification, evaluate_regression, misclassification_matrix, pearson, RegressionMetrics};
pub use ridge::{fit_kernel_ridge, fit_ridge, rbf_kernel, KernelRidge, RidgeModel};

/// Number of occupational classes; labels are `1..=NUM_CLASSES`.
pub const NUM_CLASSES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed input: {0}")]
    Parse(#[from] ParseError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("feature rows do not align; missing from second: {missing:?}; missing from first: {extra:?}")]
    Alignment { missing: Vec<String>, extra: Vec<String> },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("correlation undefined for constant input")]
    UndefinedCorrelation,
    #[error("learner does not fit a {0:?} task")]
    WrongTask(Task),
}
