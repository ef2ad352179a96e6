//! SkipGram with negative sampling over walk corpora.
//!
//! Each vertex owns an input vector (a row of `W`) and an output vector (a row
//! of `W'`). For an (input, context) pair drawn from a sliding window, the
//! context's output vector is pulled towards the input vector and a handful of
//! noise vertices are pushed away:
//!
//! ```text
//! v'_j <- v'_j - lr * (sigmoid(v'_j . v_I) - t_j) * v_I      for j in {O} + negatives
//! v_I  <- v_I  - lr * sum_j (sigmoid(v'_j . v_I) - t_j) * v'_j
//! ```
//!
//! with `t_j = 1` only for the observed context `O`. This is plain SGD on the
//! surrogate loss `-log sigmoid(v'_O . v_I) - sum_neg log sigmoid(-v'_neg . v_I)`.
//! Negatives come from corpus frequency raised to the 3/4 power.

mod alias;
mod model;
mod noise;
mod train;

use thiserror::Error;

pub use alias::AliasTable;
pub use model::{pair_loss, sgns_pair_update, EmbeddingModel};
pub use noise::NoiseDistribution;
pub use train::{train, TrainOutcome};

/// Exponent applied to corpus counts for the noise distribution.
pub const NOISE_POWER: f64 = 0.75;

#[derive(Debug, Error)]
pub enum SgnsError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// Training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    /// Context positions on each side of the input; up to `2 * radius` contexts.
    pub window_radius: usize,
    pub negatives: usize,
    pub initial_lr: f64,
    pub epochs: usize,
    pub power: f64,
    pub seed: u64,
    /// 1 trains single-threaded and reproducibly; more runs lock-free workers.
    pub threads: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 32,
            window_radius: 5,
            negatives: 5,
            initial_lr: 0.025,
            epochs: 5,
            power: NOISE_POWER,
            seed: 0,
            threads: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<(), SgnsError> {
        let bad = |m: &str| Err(SgnsError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window_radius == 0 {
            return bad("window radius must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.power != NOISE_POWER {
            return bad("noise power is fixed at 0.75");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        Ok(())
    }
}

/// Positions `j != i` with `|i - j| <= radius`, clipped to the walk.
#[inline]
pub(crate) fn window(i: usize, len: usize, radius: usize) -> impl Iterator<Item = usize> {
    let lo = i.saturating_sub(radius);
    let hi = (i + radius).min(len - 1);
    (lo..=hi).filter(move |&j| j != i)
}

/// All (input, context) pairs of a walk, ordered by input position and then
/// context position.
pub fn extract_pairs(walk: &[usize], window_radius: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..walk.len() {
        for j in window(i, walk.len(), window_radius) {
            pairs.push((walk[i], walk[j]));
        }
    }
    pairs
}

/// Number of pairs [`extract_pairs`] yields for a walk of `len` vertices.
pub fn pair_count(len: usize, window_radius: usize) -> usize {
    (0..len).map(|i| window(i, len, window_radius).count()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_of_short_walks() {
        let (a, b, c) = (0, 1, 2);
        assert_eq!(extract_pairs(&[a, b, c], 1), vec![(a, b), (b, a), (b, c), (c, b)]);
        assert!(extract_pairs(&[a], 5).is_empty());
    }

    #[test]
    fn pair_count_matches_brute_force() {
        for len in 1..30 {
            for r in 1..8 {
                let mut brute = 0;
                for i in 0..len as i64 {
                    for j in 0..len as i64 {
                        if i != j && (i - j).abs() <= r as i64 {
                            brute += 1;
                        }
                    }
                }
                let walk: Vec<usize> = (0..len).collect();
                assert_eq!(extract_pairs(&walk, r).len(), brute);
                assert_eq!(pair_count(len, r), brute);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(SgnsConfig::default().validate().is_ok());
        assert!(SgnsConfig { dim: 0, ..Default::default() }.validate().is_err());
        assert!(SgnsConfig { power: 1.0, ..Default::default() }.validate().is_err());
        assert!(SgnsConfig { initial_lr: 0.0, ..Default::default() }.validate().is_err());
    }
}
