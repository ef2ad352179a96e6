use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::IdMap;
use crate::predict::FeatureMatrix;

/// Input (`W`) and output (`W'`) vectors, one row per vocabulary entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub input: Array2<f64>,
    pub output: Array2<f64>,
    pub vocab: IdMap,
}

impl EmbeddingModel {
    /// Input vectors uniform in `(-0.5/dim, 0.5/dim)`, output vectors zero.
    pub fn init(vocab: IdMap, dim: usize, seed: u64) -> Self {
        let n = vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f64;
        let input = Array2::from_shape_simple_fn((n, dim), || rng.random_range(-half..half));
        EmbeddingModel {
            input,
            output: Array2::zeros((n, dim)),
            vocab,
        }
    }

    pub fn dim(&self) -> usize {
        self.input.ncols()
    }

    pub fn len(&self) -> usize {
        self.input.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(self.output.iter()).all(|x| x.is_finite())
    }

    /// The exported embedding: rows of `W` keyed by external id.
    pub fn to_features(&self) -> FeatureMatrix {
        FeatureMatrix::new(self.vocab.ids().to_vec(), self.input.clone()).expect("vocab and rows agree")
    }
}

#[cfg(test)]
pub(crate) fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-30.0, 30.0);
    1.0 / (1.0 + (-x).exp())
}

/// `-log sigmoid(x)`, computed without overflow.
#[inline]
pub(crate) fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// `sigmoid(score)` together with the loss term `-log sigmoid(+-score)`,
/// sharing one exponential.
#[inline]
fn sigmoid_and_loss(score: f64, positive: bool) -> (f64, f64) {
    let c = score.clamp(-30.0, 30.0);
    let e = (-c.abs()).exp();
    let p = if c >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    let signed = if positive { score } else { -score };
    let loss = if c == score { e.ln_1p() + (-signed).max(0.0) } else { neg_log_sigmoid(signed) };
    (p, loss)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let mut acc = [0.0; 4];
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Row access for the update kernel. Sequential training works on plain
/// matrices; hogwild workers share atomically stored rows.
pub(crate) trait RowStore {
    fn load_input(&self, row: usize, buf: &mut [f64]);
    fn store_input(&mut self, row: usize, buf: &[f64]);
    /// Run `f` on output row `row`, using `buf` as staging space if the row
    /// cannot be borrowed directly.
    fn update_output<R>(&mut self, row: usize, buf: &mut [f64], f: impl FnOnce(&mut [f64]) -> R) -> R;
}

impl RowStore for EmbeddingModel {
    fn load_input(&self, row: usize, buf: &mut [f64]) {
        buf.copy_from_slice(self.input.row(row).as_slice().expect("standard layout"));
    }
    fn store_input(&mut self, row: usize, buf: &[f64]) {
        self.input.row_mut(row).as_slice_mut().expect("standard layout").copy_from_slice(buf);
    }
    fn update_output<R>(&mut self, row: usize, _buf: &mut [f64], f: impl FnOnce(&mut [f64]) -> R) -> R {
        f(self.output.row_mut(row).into_slice().expect("standard layout"))
    }
}

/// Per-worker buffers for [`update_pair`].
pub(crate) struct Scratch {
    v_in: Vec<f64>,
    v_out: Vec<f64>,
    grad_in: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(dim: usize) -> Self {
        Scratch {
            v_in: vec![0.0; dim],
            v_out: vec![0.0; dim],
            grad_in: vec![0.0; dim],
        }
    }
}

/// One SGD step for `(input, positive)` against `negatives`; returns the
/// surrogate loss evaluated before the step.
pub(crate) fn update_pair<S: RowStore>(
    store: &mut S,
    scratch: &mut Scratch,
    input: usize,
    positive: usize,
    negatives: &[usize],
    lr: f64,
) -> f64 {
    let Scratch { v_in, v_out, grad_in } = scratch;
    store.load_input(input, v_in);
    grad_in.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let targets = std::iter::once((positive, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (j, label) in targets {
        loss += store.update_output(j, v_out, |out| {
            let (p, term) = sigmoid_and_loss(dot(out, v_in), label == 1.0);
            let g = lr * (p - label);
            for ((acc, o), inp) in grad_in.iter_mut().zip(out.iter_mut()).zip(v_in.iter()) {
                *acc += g * *o;
                *o -= g * inp;
            }
            term
        });
    }
    for (v, g) in v_in.iter_mut().zip(grad_in.iter()) {
        *v -= g;
    }
    store.store_input(input, v_in);
    loss
}

/// Apply the negative-sampling SGD update for one (input, context) pair in
/// place and return the pair's surrogate loss before the update.
///
/// Output vectors of the positive and every negative move first; the input
/// vector then moves along the sum of their pre-update output vectors.
pub fn sgns_pair_update(
    model: &mut EmbeddingModel,
    input: usize,
    positive: usize,
    negatives: &[usize],
    lr: f64,
) -> f64 {
    let mut scratch = Scratch::new(model.dim());
    update_pair(model, &mut scratch, input, positive, negatives, lr)
}

/// Surrogate loss `-log s(v'_pos . v_in) - sum log s(-v'_neg . v_in)`.
pub fn pair_loss(model: &EmbeddingModel, input: usize, positive: usize, negatives: &[usize]) -> f64 {
    let v_in = model.input.row(input);
    let mut loss = neg_log_sigmoid(model.output.row(positive).dot(&v_in));
    for &n in negatives {
        loss += neg_log_sigmoid(-model.output.row(n).dot(&v_in));
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn vocab(n: usize) -> IdMap {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    fn random_model(n: usize, dim: usize, seed: u64) -> EmbeddingModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = EmbeddingModel::init(vocab(n), dim, seed);
        m.input.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        m.output.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        m
    }

    #[test]
    fn init_ranges() {
        let m = EmbeddingModel::init(vocab(50), 8, 1);
        assert!(m.input.iter().all(|x| x.abs() < 0.5 / 8.0));
        assert!(m.output.iter().all(|&x| x == 0.0));
        assert_eq!(m, EmbeddingModel::init(vocab(50), 8, 1));
    }

    #[test]
    fn zero_vectors_do_not_move() {
        let mut m = EmbeddingModel::init(vocab(3), 1, 0);
        m.input.fill(0.0);
        let before = m.clone();
        sgns_pair_update(&mut m, 0, 1, &[2], 1.0);
        assert_eq!(m, before);
    }

    #[test]
    fn saturated_scores_are_a_fixed_point() {
        // sigmoid clamps at +-30, so scores far beyond that make every
        // coefficient (sigmoid - t) exactly zero in f64.
        let mut m = EmbeddingModel::init(vocab(3), 1, 0);
        m.input[[0, 0]] = 100.0;
        m.output[[1, 0]] = 100.0;
        m.output[[2, 0]] = -100.0;
        let s = sigmoid(1e4);
        assert!(1.0 - s < 1e-12);
        let before = m.clone();
        sgns_pair_update(&mut m, 0, 1, &[2], 0.5);
        for (a, b) in m.output.iter().zip(before.output.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn update_is_negative_gradient_step() {
        // Central differences on the surrogate loss, independent of the
        // update kernel.
        let h = 1e-6;
        for seed in 0..10u64 {
            let dim = 1 + (seed as usize % 8);
            let model = random_model(6, dim, seed);
            let (input, pos, negs) = (0, 1, [2, 3, 4]);
            let lr = 1e-3;
            let mut updated = model.clone();
            sgns_pair_update(&mut updated, input, pos, &negs, lr);

            let check = |which: usize, row: usize| {
                for k in 0..dim {
                    let mut plus = model.clone();
                    let mut minus = model.clone();
                    let (p, m_) = if which == 0 {
                        (&mut plus.input[[row, k]], &mut minus.input[[row, k]])
                    } else {
                        (&mut plus.output[[row, k]], &mut minus.output[[row, k]])
                    };
                    *p += h;
                    *m_ -= h;
                    let fd = (pair_loss(&plus, input, pos, &negs) - pair_loss(&minus, input, pos, &negs)) / (2.0 * h);
                    let (old, new) = if which == 0 {
                        (model.input[[row, k]], updated.input[[row, k]])
                    } else {
                        (model.output[[row, k]], updated.output[[row, k]])
                    };
                    let analytic = (old - new) / lr;
                    let rel = (analytic - fd).abs() / fd.abs().max(1e-8);
                    assert!(rel < 1e-4, "seed {seed} which {which} row {row} k {k}: {analytic} vs {fd}");
                }
            };
            check(0, input);
            for j in [pos, 2, 3, 4] {
                check(1, j);
            }
        }
    }

    #[test]
    fn loss_is_returned_before_update() {
        let mut m = random_model(4, 3, 7);
        let expected = pair_loss(&m, 0, 1, &[2, 3]);
        let got = sgns_pair_update(&mut m, 0, 1, &[2, 3], 0.1);
        assert!((expected - got).abs() < 1e-12);
    }
}
