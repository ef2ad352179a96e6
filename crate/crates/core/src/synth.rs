//! Stochastic block model graphs with block-level labels.
//!
//! Each block is a planted community: every user in it shares the block's
//! occupational class and draws income around the block's mean, so a good
//! embedding of the graph alone recovers both labels.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::graph::EdgeList;
use crate::predict::{FeatureMatrix, LabelRow, Labels, NUM_CLASSES};

/// Users per occupational class 1..=9 in the reference Twitter sample.
pub const OCCUPATION_COUNTS: [usize; NUM_CLASSES] = [461, 1615, 950, 168, 782, 270, 56, 192, 131];

/// Incomes are clamped from below at this value.
pub const INCOME_FLOOR: f64 = 1000.0;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid block model: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub class_of_block: Vec<u8>,
    /// `(mean, stddev)` income per block, GBP/year.
    pub income_of_block: Vec<(f64, f64)>,
    pub seed: u64,
}

/// Split `total` proportionally to `weights`, rounding by largest remainder.
pub fn proportional_sizes(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|&w| total as f64 * w as f64 / sum as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let short = total - sizes.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        sizes[i] += 1;
    }
    sizes
}

/// `k` block incomes evenly spaced over `[low, high]`.
pub fn spaced_incomes(k: usize, low: f64, high: f64, stddev: f64) -> Vec<(f64, f64)> {
    (0..k)
        .map(|i| {
            let t = if k > 1 { i as f64 / (k - 1) as f64 } else { 0.0 };
            (low + t * (high - low), stddev)
        })
        .collect()
}

impl SbmSpec {
    /// Nine blocks, one per occupational class, sized in proportion to
    /// [`OCCUPATION_COUNTS`] and scaled to `total` users.
    pub fn occupation_layout(total: usize, p_in: f64, p_out: f64, incomes: Vec<(f64, f64)>, seed: u64) -> Self {
        SbmSpec {
            block_sizes: proportional_sizes(total, &OCCUPATION_COUNTS),
            p_in,
            p_out,
            class_of_block: (1..=NUM_CLASSES as u8).collect(),
            income_of_block: incomes,
            seed,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// `p_in == p_out` is allowed: it is the null model with no planted
    /// structure.
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        let k = self.block_sizes.len();
        if k == 0 {
            return bad("no blocks".into());
        }
        if self.class_of_block.len() != k || self.income_of_block.len() != k {
            return bad(format!("{k} blocks but {} classes and {} incomes", self.class_of_block.len(), self.income_of_block.len()));
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) || self.p_out > self.p_in {
            return bad(format!("need 0 <= p_out <= p_in <= 1, got p_in={} p_out={}", self.p_in, self.p_out));
        }
        if let Some(s) = self.block_sizes.iter().find(|&&s| s < 2) {
            return bad(format!("block size {s} below 2"));
        }
        if let Some(c) = self.class_of_block.iter().find(|&&c| c == 0 || usize::from(c) > NUM_CLASSES) {
            return bad(format!("class {c} outside 1..={NUM_CLASSES}"));
        }
        if self.income_of_block.iter().any(|&(m, s)| !(m.is_finite() && s.is_finite() && m > 0.0 && s >= 0.0)) {
            return bad("incomes need positive means and non-negative stddevs".into());
        }
        Ok(())
    }
}

/// A generated graph with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmGraph {
    /// Each undirected edge once, as `(u, v)` with `u` before `v` in id order.
    pub edges: EdgeList,
    pub labels: Labels,
    pub block_of: Vec<usize>,
}

pub fn vertex_id(i: usize) -> String {
    format!("u{i}")
}

/// Invert the row-major index of pair `(i, j)`, `i < j`, among `C(s, 2)` pairs
/// ordered by `j` then `i`.
fn triangular_pair(idx: u64) -> (u64, u64) {
    let mut j = ((1.0 + (1.0 + 8.0 * idx as f64).sqrt()) / 2.0).floor() as u64;
    while j * (j - 1) / 2 > idx {
        j -= 1;
    }
    while (j + 1) * j / 2 <= idx {
        j += 1;
    }
    (idx - j * (j - 1) / 2, j)
}

/// Positions of successes among `m` Bernoulli(`p`) trials, via geometric gaps.
fn bernoulli_hits<R: Rng>(m: u64, p: f64, rng: &mut R) -> Vec<u64> {
    if p <= 0.0 || m == 0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..m).collect();
    }
    let log_q = (1.0 - p).ln();
    let mut hits = Vec::new();
    let mut idx: u64 = 0;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let gap = (u.ln() / log_q).floor();
        if gap >= (m - idx) as f64 {
            break;
        }
        idx += gap as u64;
        hits.push(idx);
        idx += 1;
        if idx >= m {
            break;
        }
    }
    hits
}

/// Sample an undirected SBM and its labels. Deterministic in `spec.seed`.
pub fn generate_sbm(spec: &SbmSpec) -> Result<SbmGraph, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let starts: Vec<usize> = spec
        .block_sizes
        .iter()
        .scan(0, |acc, &s| {
            let start = *acc;
            *acc += s;
            Some(start)
        })
        .collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..spec.block_sizes.len() {
        for b in a..spec.block_sizes.len() {
            let (sa, sb) = (spec.block_sizes[a] as u64, spec.block_sizes[b] as u64);
            if a == b {
                for idx in bernoulli_hits(sa * (sa - 1) / 2, spec.p_in, &mut rng) {
                    let (i, j) = triangular_pair(idx);
                    pairs.push((starts[a] + i as usize, starts[a] + j as usize));
                }
            } else {
                for idx in bernoulli_hits(sa * sb, spec.p_out, &mut rng) {
                    pairs.push((starts[a] + (idx / sb) as usize, starts[b] + (idx % sb) as usize));
                }
            }
        }
    }
    pairs.sort_unstable();

    let mut block_of = Vec::with_capacity(spec.num_vertices());
    let mut rows = Vec::with_capacity(spec.num_vertices());
    for (b, &size) in spec.block_sizes.iter().enumerate() {
        let (mean, sd) = spec.income_of_block[b];
        let normal = Normal::new(mean, sd).expect("validated");
        for _ in 0..size {
            let v = block_of.len();
            block_of.push(b);
            rows.push(LabelRow {
                id: vertex_id(v),
                occ_class: Some(spec.class_of_block[b]),
                income: Some(normal.sample(&mut rng).max(INCOME_FLOOR).round()),
            });
        }
    }
    Ok(SbmGraph {
        edges: EdgeList::new(pairs.into_iter().map(|(u, v)| (vertex_id(u), vertex_id(v))).collect()),
        labels: Labels { rows },
        block_of,
    })
}

/// Synthetic per-user feature rows: group `g` is centred on a random direction
/// scaled to `separation`, plus unit Gaussian noise. Stands in for precomputed
/// text features whose signal is independent of the graph.
pub fn group_features(ids: &[String], groups: &[usize], dim: usize, separation: f64, seed: u64) -> FeatureMatrix {
    assert_eq!(ids.len(), groups.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_groups = groups.iter().max().map_or(0, |g| g + 1);
    let centres: Vec<Vec<f64>> = (0..n_groups)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| separation * x / norm).collect()
        })
        .collect();
    let values = Array2::from_shape_fn((ids.len(), dim), |(i, k)| {
        let noise: f64 = rng.sample(StandardNormal);
        centres[groups[i]][k] + noise
    });
    FeatureMatrix::new(ids.to_vec(), values).expect("ids are unique")
}
