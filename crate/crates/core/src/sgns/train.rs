use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{update_pair, RowStore, Scratch};
use super::{pair_count, window, EmbeddingModel, NoiseDistribution, SgnsConfig, SgnsError};
use crate::seed::derive_seed;
use crate::walks::WalkCorpus;

/// Learning rate never decays below this fraction of the initial rate.
const MIN_LR_FRACTION: f64 = 1e-4;
/// Redraws allowed when a negative collides with the input or the positive.
const MAX_NEGATIVE_RETRIES: usize = 8;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    /// Mean surrogate loss per pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

#[inline]
fn learning_rate(initial: f64, done: usize, total: usize) -> f64 {
    let progress = if total == 0 { 0.0 } else { (done as f64 / total as f64).min(1.0) };
    initial * (1.0 - (1.0 - MIN_LR_FRACTION) * progress)
}

/// Fill `out` with negatives for one pair, skipping draws that hit the input
/// or the positive more than [`MAX_NEGATIVE_RETRIES`] times.
#[inline]
fn draw_negatives(
    noise: &NoiseDistribution,
    rng: &mut ChaCha8Rng,
    count: usize,
    input: usize,
    positive: usize,
    out: &mut Vec<usize>,
) {
    out.clear();
    for _ in 0..count {
        for _ in 0..=MAX_NEGATIVE_RETRIES {
            let n = noise.sample(rng);
            if n != input && n != positive {
                out.push(n);
                break;
            }
        }
    }
}

/// Walk visiting order for one epoch. Corpora list walks grouped by start
/// vertex, so training in file order would sweep one community at a time.
fn epoch_order(n_walks: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "sgns-order"));
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n_walks).collect();
    order.shuffle(&mut rng);
    order
}

/// Train input and output vectors over `corpus` with SGD.
///
/// With `threads == 1` the result is a pure function of the corpus and the
/// config. Otherwise the walks are sharded across workers that update the
/// shared matrices without locks and may overwrite each other's steps.
pub fn train(corpus: &WalkCorpus, cfg: &SgnsConfig) -> Result<TrainOutcome, SgnsError> {
    cfg.validate()?;
    if corpus.vocab.is_empty() || corpus.num_tokens() == 0 {
        return Err(SgnsError::EmptyCorpus);
    }
    let noise = NoiseDistribution::from_corpus(corpus, cfg.power)?;
    let model = EmbeddingModel::init(corpus.vocab.clone(), cfg.dim, derive_seed(cfg.seed, "sgns-init"));
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            model,
            epoch_losses: Vec::new(),
        });
    }
    if cfg.threads == 1 {
        Ok(train_sequential(corpus, cfg, &noise, model))
    } else {
        Ok(train_hogwild(corpus, cfg, &noise, model))
    }
}

fn train_sequential(
    corpus: &WalkCorpus,
    cfg: &SgnsConfig,
    noise: &NoiseDistribution,
    mut model: EmbeddingModel,
) -> TrainOutcome {
    let pairs_per_epoch: usize = corpus.walks.iter().map(|w| pair_count(w.len(), cfg.window_radius)).sum();
    let total = pairs_per_epoch * cfg.epochs;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "sgns-negatives"));
    let mut scratch = Scratch::new(cfg.dim);
    let mut negs = Vec::with_capacity(cfg.negatives);
    let mut done = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut loss = 0.0;
        let mut n_pairs = 0usize;
        for w in epoch_order(corpus.walks.len(), cfg.seed, epoch) {
            let walk = &corpus.walks[w];
            for i in 0..walk.len() {
                for j in window(i, walk.len(), cfg.window_radius) {
                    let (input, positive) = (walk[i], walk[j]);
                    let lr = learning_rate(cfg.initial_lr, done, total);
                    draw_negatives(noise, &mut rng, cfg.negatives, input, positive, &mut negs);
                    loss += update_pair(&mut model, &mut scratch, input, positive, &negs, lr);
                    done += 1;
                    n_pairs += 1;
                }
            }
        }
        epoch_losses.push(loss / n_pairs.max(1) as f64);
    }
    TrainOutcome { model, epoch_losses }
}

/// f64 matrices stored as bit patterns in relaxed atomics.
struct SharedMatrix {
    dim: usize,
    data: Vec<AtomicU64>,
}

impl SharedMatrix {
    fn from_array(a: &Array2<f64>) -> Self {
        SharedMatrix {
            dim: a.ncols(),
            data: a.iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
        }
    }

    fn load(&self, row: usize, buf: &mut [f64]) {
        let base = row * self.dim;
        for (k, b) in buf.iter_mut().enumerate() {
            *b = f64::from_bits(self.data[base + k].load(Ordering::Relaxed));
        }
    }

    fn store(&self, row: usize, buf: &[f64]) {
        let base = row * self.dim;
        for (k, b) in buf.iter().enumerate() {
            self.data[base + k].store(b.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_array(self, rows: usize) -> Array2<f64> {
        let v = self.data.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
        Array2::from_shape_vec((rows, self.dim), v).expect("shape preserved")
    }
}

struct SharedRows<'a> {
    input: &'a SharedMatrix,
    output: &'a SharedMatrix,
}

impl RowStore for SharedRows<'_> {
    fn load_input(&self, row: usize, buf: &mut [f64]) {
        self.input.load(row, buf)
    }
    fn store_input(&mut self, row: usize, buf: &[f64]) {
        self.input.store(row, buf)
    }
    fn update_output<R>(&mut self, row: usize, buf: &mut [f64], f: impl FnOnce(&mut [f64]) -> R) -> R {
        self.output.load(row, buf);
        let r = f(buf);
        self.output.store(row, buf);
        r
    }
}

fn train_hogwild(
    corpus: &WalkCorpus,
    cfg: &SgnsConfig,
    noise: &NoiseDistribution,
    model: EmbeddingModel,
) -> TrainOutcome {
    let rows = model.len();
    let input = SharedMatrix::from_array(&model.input);
    let output = SharedMatrix::from_array(&model.output);
    let pairs_per_epoch: usize = corpus.walks.iter().map(|w| pair_count(w.len(), cfg.window_radius)).sum();
    let total = pairs_per_epoch * cfg.epochs;
    let done = AtomicUsize::new(0);
    let shard_len = corpus.walks.len().div_ceil(cfg.threads).max(1);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let order = epoch_order(corpus.walks.len(), cfg.seed, epoch);
        let shards: Vec<&[usize]> = order.chunks(shard_len).collect();
        let results: Vec<(f64, usize)> = std::thread::scope(|s| {
            let handles: Vec<_> = shards
                .iter()
                .enumerate()
                .map(|(worker, shard)| {
                    let (input, output, done) = (&input, &output, &done);
                    s.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "sgns-negatives"));
                        rng.set_stream((epoch * cfg.threads + worker) as u64 + 1);
                        let mut store = SharedRows { input, output };
                        let mut scratch = Scratch::new(cfg.dim);
                        let mut negs = Vec::with_capacity(cfg.negatives);
                        let (mut loss, mut n) = (0.0, 0usize);
                        for &w in shard.iter() {
                            let walk = &corpus.walks[w];
                            let lr = learning_rate(cfg.initial_lr, done.load(Ordering::Relaxed), total);
                            let mut local = 0;
                            for i in 0..walk.len() {
                                for j in window(i, walk.len(), cfg.window_radius) {
                                    let (vi, vo) = (walk[i], walk[j]);
                                    draw_negatives(noise, &mut rng, cfg.negatives, vi, vo, &mut negs);
                                    loss += update_pair(&mut store, &mut scratch, vi, vo, &negs, lr);
                                    local += 1;
                                }
                            }
                            done.fetch_add(local, Ordering::Relaxed);
                            n += local;
                        }
                        (loss, n)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect()
        });
        let (loss, n) = results.iter().fold((0.0, 0), |(l, c), (dl, dc)| (l + dl, c + dc));
        epoch_losses.push(loss / n.max(1) as f64);
    }

    TrainOutcome {
        model: EmbeddingModel {
            input: input.into_array(rows),
            output: output.into_array(rows),
            vocab: model.vocab,
        },
        epoch_losses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeList, Graph};
    use crate::walks::{generate_corpus, WalkConfig};

    fn two_cliques() -> WalkCorpus {
        let mut pairs = Vec::new();
        for block in 0..2 {
            for i in 0..8 {
                for j in (i + 1)..8 {
                    pairs.push((format!("{block}-{i}"), format!("{block}-{j}")));
                }
            }
        }
        pairs.push(("0-0".into(), "1-0".into()));
        let g = Graph::build_undirected(&EdgeList::new(pairs)).unwrap();
        generate_corpus(&g, &WalkConfig { walk_length: 20, walks_per_vertex: 5, seed: 3, parallel: false })
    }

    #[test]
    fn zero_epochs_returns_init() {
        let corpus = two_cliques();
        let cfg = SgnsConfig { dim: 8, epochs: 0, seed: 11, ..Default::default() };
        let out = train(&corpus, &cfg).unwrap();
        assert_eq!(out.model, EmbeddingModel::init(corpus.vocab.clone(), 8, derive_seed(11, "sgns-init")));
        assert!(out.epoch_losses.is_empty());
    }

    #[test]
    fn sequential_is_deterministic() {
        let corpus = two_cliques();
        let cfg = SgnsConfig { dim: 8, epochs: 2, seed: 5, ..Default::default() };
        let a = train(&corpus, &cfg).unwrap();
        let b = train(&corpus, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert!(a.model.is_finite());
    }

    #[test]
    fn loss_falls_over_epochs() {
        let corpus = two_cliques();
        let cfg = SgnsConfig { dim: 8, epochs: 5, seed: 5, ..Default::default() };
        let out = train(&corpus, &cfg).unwrap();
        assert!(out.epoch_losses[4] <= out.epoch_losses[0], "{:?}", out.epoch_losses);
    }

    #[test]
    fn hogwild_trains_finite_model() {
        let corpus = two_cliques();
        let cfg = SgnsConfig { dim: 8, epochs: 3, seed: 5, threads: 4, ..Default::default() };
        let out = train(&corpus, &cfg).unwrap();
        assert!(out.model.is_finite());
        assert_eq!(out.epoch_losses.len(), 3);
        assert!(out.epoch_losses[2] < out.epoch_losses[0]);
    }

    #[test]
    fn empty_corpus_rejected() {
        let corpus = WalkCorpus { walks: vec![], vocab: Default::default() };
        assert!(matches!(train(&corpus, &SgnsConfig::default()), Err(SgnsError::EmptyCorpus)));
    }

    #[test]
    fn lr_schedule_endpoints() {
        assert_eq!(learning_rate(0.025, 0, 100), 0.025);
        assert!((learning_rate(0.025, 100, 100) - 0.025e-4).abs() < 1e-15);
    }
}
