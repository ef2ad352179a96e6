use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use super::linalg::cholesky_solve;
use super::{PredictError, NUM_CLASSES};

const MAX_NEWTON_ITERS: usize = 100;
const MAX_HALVINGS: usize = 50;
const ARMIJO: f64 = 1e-4;
const JITTER: f64 = 1e-10;

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// L2-penalized logistic loss over `[w, b]` with an unpenalized intercept:
/// `sum_i log(1 + exp(-s_i (x_i.w + b))) + l2/2 |w|^2`, `s_i = +-1`.
pub(crate) struct LogisticProblem<'a> {
    /// `[x 1]`, and its transpose in standard layout for fast gradients.
    z: Array2<f64>,
    zt: Array2<f64>,
    y: &'a [bool],
    l2: f64,
}

impl<'a> LogisticProblem<'a> {
    pub fn new(x: ArrayView2<f64>, y: &'a [bool], l2: f64) -> Self {
        let (n, d) = x.dim();
        let mut z = Array2::ones((n, d + 1));
        z.slice_mut(s![.., ..d]).assign(&x);
        let zt = z.t().as_standard_layout().into_owned();
        LogisticProblem { z, zt, y, l2 }
    }

    fn dim(&self) -> usize {
        self.z.ncols() - 1
    }

    fn margins(&self, theta: ArrayView1<f64>) -> Array1<f64> {
        self.z.dot(&theta)
    }

    pub fn value(&self, theta: ArrayView1<f64>) -> f64 {
        let d = self.dim();
        let m = self.margins(theta);
        let data: f64 = m
            .iter()
            .zip(self.y)
            .map(|(&mi, &yi)| log1p_exp(if yi { -mi } else { mi }))
            .sum();
        let w = theta.slice(s![..d]);
        data + 0.5 * self.l2 * w.dot(&w)
    }

    /// Gradient and the fitted probabilities it was built from.
    fn gradient_with_probs(&self, theta: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
        let d = self.dim();
        let p = self.margins(theta).mapv(sigmoid);
        let resid: Array1<f64> = p.iter().zip(self.y).map(|(&pi, &yi)| pi - f64::from(u8::from(yi))).collect();
        let mut g = self.zt.dot(&resid);
        g.slice_mut(s![..d]).scaled_add(self.l2, &theta.slice(s![..d]));
        (g, p)
    }

    #[cfg(test)]
    pub fn gradient(&self, theta: ArrayView1<f64>) -> Array1<f64> {
        self.gradient_with_probs(theta).0
    }

    fn hessian(&self, p: &Array1<f64>) -> Array2<f64> {
        let d = self.dim();
        let mut wz = self.z.clone();
        for (mut row, &pi) in wz.rows_mut().into_iter().zip(p) {
            row *= pi * (1.0 - pi);
        }
        let mut h = self.zt.dot(&wz);
        for k in 0..=d {
            h[[k, k]] += JITTER + if k < d { self.l2 } else { 0.0 };
        }
        h
    }
}

/// A fitted binary logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLogistic {
    pub weights: Array1<f64>,
    pub intercept: f64,
    /// Objective value after each accepted Newton step, starting at zero weights.
    pub loss_history: Vec<f64>,
}

impl BinaryLogistic {
    /// Damped Newton with backtracking; each accepted step lowers the
    /// objective.
    pub fn fit(x: ArrayView2<f64>, y: &[bool], l2: f64) -> Result<Self, PredictError> {
        if x.nrows() != y.len() {
            return Err(PredictError::LengthMismatch { left: x.nrows(), right: y.len() });
        }
        let d = x.ncols();
        let problem = LogisticProblem::new(x, y, l2);
        let mut theta = Array1::<f64>::zeros(d + 1);
        let mut f = problem.value(theta.view());
        let mut history = vec![f];
        for _ in 0..MAX_NEWTON_ITERS {
            let (g, p) = problem.gradient_with_probs(theta.view());
            let step = cholesky_solve(problem.hessian(&p).view(), g.view())?;
            let decrement = g.dot(&step);
            if decrement <= 1e-12 * (1.0 + f.abs()) {
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let candidate = &theta - &(t * &step);
                let fc = problem.value(candidate.view());
                if fc <= f - ARMIJO * t * decrement {
                    accepted = Some((candidate, fc));
                    break;
                }
                t *= 0.5;
            }
            let Some((next, fc)) = accepted else { break };
            theta = next;
            f = fc;
            history.push(f);
        }
        Ok(BinaryLogistic {
            weights: theta.slice(s![..d]).to_owned(),
            intercept: theta[d],
            loss_history: history,
        })
    }

    pub fn decision(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }
}

/// One binary model per class seen in training; prediction is the argmax of
/// the binary scores, lowest class winning ties.
#[derive(Debug, Clone, PartialEq)]
pub struct OvaClassifier {
    pub classes: Vec<u8>,
    pub models: Vec<BinaryLogistic>,
}

impl OvaClassifier {
    /// Scores for classes `1..=NUM_CLASSES`; classes absent from training
    /// score `-inf`.
    pub fn decision(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut scores = Array2::from_elem((x.nrows(), NUM_CLASSES), f64::NEG_INFINITY);
        for (&c, m) in self.classes.iter().zip(&self.models) {
            scores.column_mut(usize::from(c) - 1).assign(&m.decision(x));
        }
        scores
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<u8> {
        self.decision(x)
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for k in 1..row.len() {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                best as u8 + 1
            })
            .collect()
    }
}

/// Fit one-vs-all L2 logistic regression on classes `1..=NUM_CLASSES`.
pub fn fit_logreg_ova(x: ArrayView2<f64>, y: &[u8], l2: f64) -> Result<OvaClassifier, PredictError> {
    if x.nrows() != y.len() {
        return Err(PredictError::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if y.is_empty() {
        return Err(PredictError::Empty);
    }
    let mut classes: Vec<u8> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(PredictError::DegenerateData(format!("only class {} present", classes[0])));
    }
    let models = classes
        .iter()
        .map(|&c| {
            let target: Vec<bool> = y.iter().map(|&yi| yi == c).collect();
            BinaryLogistic::fit(x, &target, l2)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OvaClassifier { classes, models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = Array2::from_shape_simple_fn((12, 5), || rng.random_range(-1.0..1.0));
        let y: Vec<bool> = (0..12).map(|_| rng.random_bool(0.5)).collect();
        let theta = Array1::from_shape_simple_fn(6, || rng.random_range(-1.0..1.0));
        let problem = LogisticProblem::new(x.view(), &y, 0.3);
        let g = problem.gradient(theta.view());
        let h = 1e-5;
        for k in 0..6 {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[k] += h;
            minus[k] -= h;
            let fd = (problem.value(plus.view()) - problem.value(minus.view())) / (2.0 * h);
            assert!((g[k] - fd).abs() / fd.abs().max(1e-8) < 1e-5, "{k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn loss_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_simple_fn((60, 4), || rng.random_range(-2.0..2.0));
        let y: Vec<bool> = x.rows().into_iter().map(|r| r[0] + 0.3 * r[1] > rng.random_range(-0.5..0.5)).collect();
        for l2 in [1e-3, 1.0, 100.0] {
            let m = BinaryLogistic::fit(x.view(), &y, l2).unwrap();
            assert!(m.loss_history.len() > 1);
            assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0]), "{:?}", m.loss_history);
        }
    }

    #[test]
    fn separable_two_class() {
        let x = array![[-2.0, 0.1], [-1.5, -0.3], [-1.0, 0.2], [1.0, 0.0], [1.4, -0.2], [2.5, 0.3]];
        let y = [2, 2, 2, 5, 5, 5];
        let clf = fit_logreg_ova(x.view(), &y, 1e-3).unwrap();
        assert_eq!(clf.predict(x.view()), y.to_vec());
        assert_eq!(clf.classes, vec![2, 5]);
    }

    #[test]
    fn constant_features_predict_majority() {
        let x = Array2::from_elem((10, 3), 0.0);
        let y = [1, 3, 3, 3, 3, 2, 2, 9, 3, 1];
        let clf = fit_logreg_ova(x.view(), &y, 1.0).unwrap();
        assert!(clf.predict(x.view()).iter().all(|&c| c == 3));
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let x = Array2::from_elem((4, 1), 0.0);
        let clf = fit_logreg_ova(x.view(), &[4, 4, 7, 7], 1.0).unwrap();
        assert_eq!(clf.predict(x.view()), vec![4; 4]);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = Array2::from_elem((3, 1), 1.0);
        assert!(matches!(fit_logreg_ova(x.view(), &[2, 2, 2], 1.0), Err(PredictError::DegenerateData(_))));
    }

    #[test]
    fn deterministic_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_simple_fn((40, 3), || rng.random_range(-1.0..1.0));
        let y: Vec<u8> = (0..40).map(|i| (i % 3) as u8 + 1).collect();
        assert_eq!(fit_logreg_ova(x.view(), &y, 0.1).unwrap(), fit_logreg_ova(x.view(), &y, 0.1).unwrap());
    }
}
