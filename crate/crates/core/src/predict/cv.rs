//! Nested k-fold cross-validation.
//!
//! Outer folds score; inner folds inside each outer training set choose the
//! hyperparameters (and, when several feature views are given, the view).

use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::dataset::{TaskData, Targets};
use super::linalg::Standardizer;
use super::logistic::{fit_logreg_ova, OvaClassifier};
use super::metrics::{evaluate_classification, evaluate_regression, misclassification_matrix};
use super::ridge::{fit_kernel_ridge, fit_ridge, KernelRidge, RidgeModel};
use super::{PredictError, Task, NUM_CLASSES};

/// Fewest samples nested CV accepts.
pub const MIN_SAMPLES: usize = 20;

/// A learner with its hyperparameters. Features are z-scored with training
/// statistics before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum Learner {
    LogisticOva { l2: f64 },
    Ridge { l2: f64 },
    KernelRidge { l2: f64, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Logistic,
    Ridge,
    KernelRidge,
}

const L2_GRID: [f64; 6] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2];
const GAMMA_FACTORS: [f64; 3] = [0.1, 1.0, 10.0];

/// Log-spaced l2 grid (and `gamma = c / dim` for the kernel learner).
pub fn default_grid(kind: LearnerKind, dim: usize) -> Vec<Learner> {
    match kind {
        LearnerKind::Logistic => L2_GRID.iter().map(|&l2| Learner::LogisticOva { l2 }).collect(),
        LearnerKind::Ridge => L2_GRID.iter().map(|&l2| Learner::Ridge { l2 }).collect(),
        LearnerKind::KernelRidge => L2_GRID
            .iter()
            .flat_map(|&l2| {
                GAMMA_FACTORS
                    .iter()
                    .map(move |&c| Learner::KernelRidge { l2, gamma: c / dim.max(1) as f64 })
            })
            .collect(),
    }
}

#[derive(Debug, Clone)]
enum Model {
    Classifier(OvaClassifier),
    Linear(RidgeModel),
    Kernel(KernelRidge),
}

/// A fitted learner, including its feature scaling.
#[derive(Debug, Clone)]
pub struct Fitted {
    scaler: Standardizer,
    model: Model,
}

impl Fitted {
    pub fn predict(&self, x: ArrayView2<f64>) -> Targets {
        let z = self.scaler.transform(x);
        match &self.model {
            Model::Classifier(m) => Targets::Classes(m.predict(z.view())),
            Model::Linear(m) => Targets::Values(m.predict(z.view()).to_vec()),
            Model::Kernel(m) => Targets::Values(m.predict(z.view()).to_vec()),
        }
    }
}

impl Learner {
    pub fn task(&self) -> Task {
        match self {
            Learner::LogisticOva { .. } => Task::Classification,
            Learner::Ridge { .. } | Learner::KernelRidge { .. } => Task::Regression,
        }
    }

    pub fn fit(&self, x: ArrayView2<f64>, y: &Targets) -> Result<Fitted, PredictError> {
        let scaler = Standardizer::fit(x);
        let z = scaler.transform(x);
        let model = match (self, y) {
            (Learner::LogisticOva { l2 }, Targets::Classes(c)) => Model::Classifier(fit_logreg_ova(z.view(), c, *l2)?),
            (Learner::Ridge { l2 }, Targets::Values(v)) => {
                Model::Linear(fit_ridge(z.view(), ArrayView1::from(v.as_slice()), *l2)?)
            }
            (Learner::KernelRidge { l2, gamma }, Targets::Values(v)) => {
                Model::Kernel(fit_kernel_ridge(z.view(), ArrayView1::from(v.as_slice()), *l2, *gamma)?)
            }
            _ => return Err(PredictError::WrongTask(y.task())),
        };
        Ok(Fitted { scaler, model })
    }
}

/// Higher is better: accuracy, or negated MAE.
fn score(pred: &Targets, truth: &Targets) -> Result<f64, PredictError> {
    match (pred, truth) {
        (Targets::Classes(p), Targets::Classes(t)) => evaluate_classification(p, t),
        (Targets::Values(p), Targets::Values(t)) => {
            if t.is_empty() {
                return Err(PredictError::Empty);
            }
            Ok(-p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / t.len() as f64)
        }
        _ => Err(PredictError::WrongTask(truth.task())),
    }
}

/// Outer test folds and, per outer fold, inner validation folds over its
/// training rows. All index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub outer: Vec<Vec<usize>>,
    pub inner: Vec<Vec<Vec<usize>>>,
    pub seed: u64,
}

/// Deal `indices` into `k` folds. With `strata`, each stratum is shuffled and
/// dealt in turn from a shared counter, so per-fold stratum counts differ by at
/// most one.
fn deal(indices: &[usize], strata: Option<&[u8]>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    let groups: Vec<Vec<usize>> = match strata {
        Some(s) => {
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); 256];
            for &i in indices {
                by_class[usize::from(s[i])].push(i);
            }
            by_class.into_iter().filter(|g| !g.is_empty()).collect()
        }
        None => vec![indices.to_vec()],
    };
    let mut next = 0;
    for mut g in groups {
        g.shuffle(rng);
        for i in g {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

impl FoldPlan {
    fn build(n: usize, strata: Option<&[u8]>, k_outer: usize, k_inner: usize, seed: u64) -> Result<Self, PredictError> {
        if k_outer < 2 || k_inner < 2 {
            return Err(PredictError::TooFewSamples { n: k_outer.min(k_inner), min: 2 });
        }
        if n < k_outer {
            return Err(PredictError::TooFewSamples { n, min: k_outer });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all: Vec<usize> = (0..n).collect();
        let outer = deal(&all, strata, k_outer, &mut rng);
        let mut plan = FoldPlan { outer, inner: Vec::new(), seed };
        if let Some(short) = (0..k_outer).map(|f| plan.outer_train(f).len()).find(|&len| len < k_inner) {
            return Err(PredictError::TooFewSamples { n: short, min: k_inner });
        }
        plan.inner = (0..k_outer)
            .map(|f| deal(&plan.outer_train(f), strata, k_inner, &mut rng))
            .collect();
        Ok(plan)
    }

    /// Class-stratified outer and inner folds.
    pub fn stratified(classes: &[u8], k_outer: usize, k_inner: usize, seed: u64) -> Result<Self, PredictError> {
        Self::build(classes.len(), Some(classes), k_outer, k_inner, seed)
    }

    /// Unstratified shuffled folds.
    pub fn shuffled(n: usize, k_outer: usize, k_inner: usize, seed: u64) -> Result<Self, PredictError> {
        Self::build(n, None, k_outer, k_inner, seed)
    }

    /// Stratified for class targets, shuffled for continuous ones.
    pub fn for_targets(y: &Targets, k_outer: usize, k_inner: usize, seed: u64) -> Result<Self, PredictError> {
        match y {
            Targets::Classes(c) => Self::stratified(c, k_outer, k_inner, seed),
            Targets::Values(v) => Self::shuffled(v.len(), k_outer, k_inner, seed),
        }
    }

    pub fn num_samples(&self) -> usize {
        self.outer.iter().map(Vec::len).sum()
    }

    pub fn outer_train(&self, f: usize) -> Vec<usize> {
        let mut train: Vec<usize> = self
            .outer
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        train.sort_unstable();
        train
    }

    /// `(train, validation)` rows of inner split `g` of outer fold `f`.
    pub fn inner_split(&self, f: usize, g: usize) -> (Vec<usize>, Vec<usize>) {
        let folds = &self.inner[f];
        let mut train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(h, _)| h != g)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        train.sort_unstable();
        (train, folds[g].clone())
    }
}

/// The feature view and learner picked for one outer fold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridChoice {
    pub view: String,
    #[serde(flatten)]
    pub learner: Learner,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub chosen: GridChoice,
    /// Mean inner-validation score of the chosen point (accuracy %, or -MAE).
    pub inner_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Aggregate {
    /// Mean of per-fold accuracies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooled_accuracy: Option<f64>,
    /// Accuracy of predicting each fold's training-majority class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub majority_baseline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misclassification: Option<[[usize; NUM_CLASSES]; NUM_CLASSES]>,
    /// MAE of the pooled out-of-fold predictions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae_fold_mean: Option<f64>,
    /// Pooled MAE of predicting each fold's training mean.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_baseline_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub task: Task,
    pub n_samples: usize,
    pub folds: Vec<FoldResult>,
    pub aggregate: Aggregate,
    /// Out-of-fold predictions aligned with the input rows.
    #[serde(skip)]
    pub predictions: Targets,
    #[serde(skip)]
    pub truth: Targets,
}

/// Nested cross-validation over one feature matrix.
pub fn nested_cv(data: &TaskData, grid: &[Learner], plan: &FoldPlan) -> Result<EvalReport, PredictError> {
    nested_cv_views(&[("features", data.x.view())], &data.y, grid, plan)
}

struct OuterOutcome {
    result: FoldResult,
    test: Vec<usize>,
    pred: Targets,
    baseline: Targets,
}

fn baseline_prediction(train_y: &Targets, n_test: usize) -> Targets {
    match train_y {
        Targets::Classes(c) => {
            let mut counts = [0usize; 256];
            for &x in c {
                counts[usize::from(x)] += 1;
            }
            // max_by_key keeps the last maximum; scan in reverse so the lowest class wins
            let majority = (0..256).rev().max_by_key(|&k| counts[k]).unwrap_or(1) as u8;
            Targets::Classes(vec![majority; n_test])
        }
        Targets::Values(v) => {
            let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
            Targets::Values(vec![mean; n_test])
        }
    }
}

/// Nested cross-validation where the search space is every (view, learner)
/// pair. All views must have one row per target. Ties in the inner score go
/// to the earlier view, then the earlier learner.
pub fn nested_cv_views(
    views: &[(&str, ArrayView2<f64>)],
    y: &Targets,
    grid: &[Learner],
    plan: &FoldPlan,
) -> Result<EvalReport, PredictError> {
    if grid.is_empty() || views.is_empty() {
        return Err(PredictError::EmptyGrid);
    }
    let n = y.len();
    if n < MIN_SAMPLES {
        return Err(PredictError::TooFewSamples { n, min: MIN_SAMPLES });
    }
    for (_, x) in views {
        if x.nrows() != n {
            return Err(PredictError::LengthMismatch { left: x.nrows(), right: n });
        }
    }
    if plan.num_samples() != n {
        return Err(PredictError::LengthMismatch { left: plan.num_samples(), right: n });
    }
    let task = y.task();
    if let Some(l) = grid.iter().find(|l| l.task() != task) {
        return Err(PredictError::WrongTask(l.task()));
    }

    let outcomes: Vec<OuterOutcome> = (0..plan.outer.len())
        .into_par_iter()
        .map(|f| {
            let mut best: Option<(f64, usize, Learner)> = None;
            for (v, (_, x)) in views.iter().enumerate() {
                for learner in grid {
                    let mut total = 0.0;
                    for g in 0..plan.inner[f].len() {
                        let (tr, va) = plan.inner_split(f, g);
                        let fitted = learner.fit(x.select(Axis(0), &tr).view(), &y.select(&tr))?;
                        total += score(&fitted.predict(x.select(Axis(0), &va).view()), &y.select(&va))?;
                    }
                    let mean = total / plan.inner[f].len() as f64;
                    if best.as_ref().is_none_or(|(b, _, _)| mean > *b) {
                        best = Some((mean, v, *learner));
                    }
                }
            }
            let (inner_score, v, learner) = best.expect("grid non-empty");
            let x = &views[v].1;
            let train = plan.outer_train(f);
            let test = plan.outer[f].clone();
            let train_y = y.select(&train);
            let test_y = y.select(&test);
            let fitted = learner.fit(x.select(Axis(0), &train).view(), &train_y)?;
            let pred = fitted.predict(x.select(Axis(0), &test).view());
            let (accuracy, mae, rho) = match (&pred, &test_y) {
                (Targets::Classes(p), Targets::Classes(t)) => (Some(evaluate_classification(p, t)?), None, None),
                (Targets::Values(p), Targets::Values(t)) => {
                    let m = evaluate_regression(p, t)?;
                    (None, Some(m.mae), m.rho)
                }
                _ => unreachable!("learner task checked"),
            };
            Ok(OuterOutcome {
                result: FoldResult {
                    fold: f,
                    n_train: train.len(),
                    n_test: test.len(),
                    chosen: GridChoice { view: views[v].0.to_string(), learner },
                    inner_score,
                    accuracy,
                    mae,
                    rho,
                },
                baseline: baseline_prediction(&train_y, test.len()),
                test,
                pred,
            })
        })
        .collect::<Result<_, PredictError>>()?;

    let mut aggregate = Aggregate::default();
    let predictions = match y {
        Targets::Classes(truth) => {
            let mut pooled = vec![0u8; n];
            let mut base = vec![0u8; n];
            for o in &outcomes {
                let (Targets::Classes(p), Targets::Classes(b)) = (&o.pred, &o.baseline) else { unreachable!() };
                for (k, &i) in o.test.iter().enumerate() {
                    pooled[i] = p[k];
                    base[i] = b[k];
                }
            }
            let accs: Vec<f64> = outcomes.iter().filter_map(|o| o.result.accuracy).collect();
            aggregate.accuracy = Some(accs.iter().sum::<f64>() / accs.len() as f64);
            aggregate.pooled_accuracy = Some(evaluate_classification(&pooled, truth)?);
            aggregate.majority_baseline = Some(evaluate_classification(&base, truth)?);
            aggregate.misclassification = Some(misclassification_matrix(&pooled, truth));
            Targets::Classes(pooled)
        }
        Targets::Values(truth) => {
            let mut pooled = vec![0.0; n];
            let mut base = vec![0.0; n];
            for o in &outcomes {
                let (Targets::Values(p), Targets::Values(b)) = (&o.pred, &o.baseline) else { unreachable!() };
                for (k, &i) in o.test.iter().enumerate() {
                    pooled[i] = p[k];
                    base[i] = b[k];
                }
            }
            let m = evaluate_regression(&pooled, truth)?;
            aggregate.mae = Some(m.mae);
            aggregate.rho = m.rho;
            let maes: Vec<f64> = outcomes.iter().filter_map(|o| o.result.mae).collect();
            aggregate.mae_fold_mean = Some(maes.iter().sum::<f64>() / maes.len() as f64);
            aggregate.mean_baseline_mae = Some(evaluate_regression(&base, truth)?.mae);
            Targets::Values(pooled)
        }
    };

    Ok(EvalReport {
        task,
        n_samples: n,
        folds: outcomes.into_iter().map(|o| o.result).collect(),
        aggregate,
        predictions,
        truth: y.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;
    use std::collections::HashSet;

    fn classes(n: usize) -> Vec<u8> {
        // imbalanced: class k gets weight ~ k
        (0..n).map(|i| [1, 2, 2, 3, 3, 3, 4, 4, 4, 4][i % 10]).collect()
    }

    #[test]
    fn partitions_are_exhaustive_and_disjoint() {
        let y = classes(137);
        let plan = FoldPlan::stratified(&y, 10, 10, 4).unwrap();
        let mut seen = vec![0; y.len()];
        for (f, fold) in plan.outer.iter().enumerate() {
            for &i in fold {
                seen[i] += 1;
            }
            let outer_train: HashSet<usize> = plan.outer_train(f).into_iter().collect();
            assert!(fold.iter().all(|i| !outer_train.contains(i)));
            let mut inner_seen = 0;
            for g in 0..10 {
                let (tr, va) = plan.inner_split(f, g);
                let tr: HashSet<usize> = tr.into_iter().collect();
                assert!(va.iter().all(|i| !tr.contains(i) && outer_train.contains(i)));
                assert_eq!(tr.len() + va.len(), outer_train.len());
                inner_seen += va.len();
            }
            assert_eq!(inner_seen, outer_train.len());
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn stratification_within_one_per_class() {
        let y = classes(203);
        let plan = FoldPlan::stratified(&y, 10, 10, 8).unwrap();
        let check = |folds: &[Vec<usize>]| {
            for c in 1..=4u8 {
                let counts: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| y[i] == c).count()).collect();
                let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                assert!(hi - lo <= 1, "class {c}: {counts:?}");
            }
        };
        check(&plan.outer);
        for inner in &plan.inner {
            check(inner);
        }
    }

    #[test]
    fn plan_is_seeded() {
        let a = FoldPlan::shuffled(50, 10, 5, 1).unwrap();
        assert_eq!(a, FoldPlan::shuffled(50, 10, 5, 1).unwrap());
        assert_ne!(a, FoldPlan::shuffled(50, 10, 5, 2).unwrap());
        assert!(FoldPlan::shuffled(5, 10, 10, 1).is_err());
    }

    fn blobs(n: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<u8> = (0..n).map(|i| (i % 3) as u8 + 1).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            let c = f64::from(y[i]);
            (if j == 0 { 3.0 * c } else { -2.0 * c }) + rng.random_range(-0.5..0.5)
        });
        (x, y)
    }

    #[test]
    fn single_point_grid_is_plain_cv() {
        let (x, y) = blobs(60, 1);
        let data = TaskData { ids: vec![String::new(); 60], x, y: Targets::Classes(y) };
        let plan = FoldPlan::for_targets(&data.y, 10, 3, 5).unwrap();
        let grid = [Learner::LogisticOva { l2: 1.0 }];
        let report = nested_cv(&data, &grid, &plan).unwrap();
        for (f, fold) in report.folds.iter().enumerate() {
            let train = plan.outer_train(f);
            let fitted = grid[0].fit(data.x.select(Axis(0), &train).view(), &data.y.select(&train)).unwrap();
            let Targets::Classes(p) = fitted.predict(data.x.select(Axis(0), &plan.outer[f]).view()) else { panic!() };
            let Targets::Classes(t) = data.y.select(&plan.outer[f]) else { panic!() };
            assert_eq!(fold.accuracy.unwrap(), evaluate_classification(&p, &t).unwrap());
        }
        assert_eq!(report.aggregate.accuracy, Some(100.0));
        let m = report.aggregate.misclassification.unwrap();
        assert_eq!(m.iter().flatten().sum::<usize>(), 60);
    }

    #[test]
    fn regression_beats_mean_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_simple_fn((80, 3), || rng.random_range(-1.0..1.0));
        let y: Vec<f64> = x.rows().into_iter().map(|r| 30000.0 + 8000.0 * r[0] - 3000.0 * r[2]).collect();
        let data = TaskData { ids: vec![String::new(); 80], x, y: Targets::Values(y) };
        let plan = FoldPlan::for_targets(&data.y, 10, 10, 3).unwrap();
        let report = nested_cv(&data, &default_grid(LearnerKind::Ridge, 3), &plan).unwrap();
        let agg = &report.aggregate;
        assert!(agg.rho.unwrap() > 0.99);
        assert!(agg.mae.unwrap() < 0.1 * agg.mean_baseline_mae.unwrap());
        assert_eq!(report.folds[0].chosen.learner, Learner::Ridge { l2: 1e-3 });
    }

    #[test]
    fn view_selection_prefers_informative_view() {
        let (x, y) = blobs(60, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Array2::from_shape_simple_fn((60, 2), || rng.random_range(-1.0..1.0));
        let y = Targets::Classes(y);
        let plan = FoldPlan::for_targets(&y, 5, 3, 1).unwrap();
        let report = nested_cv_views(
            &[("noise", noise.view()), ("signal", x.view())],
            &y,
            &[Learner::LogisticOva { l2: 1.0 }],
            &plan,
        )
        .unwrap();
        assert!(report.folds.iter().all(|f| f.chosen.view == "signal"));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, y) = blobs(30, 1);
        let data = TaskData { ids: vec![String::new(); 30], x, y: Targets::Classes(y) };
        let plan = FoldPlan::for_targets(&data.y, 3, 3, 1).unwrap();
        assert!(matches!(nested_cv(&data, &[], &plan), Err(PredictError::EmptyGrid)));
        assert!(matches!(nested_cv(&data, &[Learner::Ridge { l2: 1.0 }], &plan), Err(PredictError::WrongTask(_))));
        let small = TaskData {
            ids: vec![String::new(); 10],
            x: data.x.slice(ndarray::s![..10, ..]).to_owned(),
            y: data.y.select(&(0..10).collect::<Vec<_>>()),
        };
        let plan = FoldPlan::for_targets(&small.y, 2, 2, 1).unwrap();
        assert!(matches!(
            nested_cv(&small, &[Learner::LogisticOva { l2: 1.0 }], &plan),
            Err(PredictError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn default_grids() {
        assert_eq!(default_grid(LearnerKind::Logistic, 32).len(), 6);
        let k = default_grid(LearnerKind::KernelRidge, 32);
        assert_eq!(k.len(), 18);
        assert_eq!(k[1], Learner::KernelRidge { l2: 1e-3, gamma: 1.0 / 32.0 });
    }
}
