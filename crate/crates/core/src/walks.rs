//! Uniform random walks over an undirected [`Graph`].

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::graph::{Graph, IdMap};
use crate::parse::ParseError;

/// Walk-corpus settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkConfig {
    /// Vertices per walk, start included.
    pub walk_length: usize,
    pub walks_per_vertex: usize,
    pub seed: u64,
    /// Generate walks on the rayon pool. The output does not depend on this.
    pub parallel: bool,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walk_length: 80,
            walks_per_vertex: 1,
            seed: 0,
            parallel: false,
        }
    }
}

/// Vertex sequences, one per walk, plus the vocabulary they index into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
    pub vocab: IdMap,
}

/// The RNG stream for walk `index`: every walk gets its own ChaCha stream so
/// generation order never affects the result.
pub fn walk_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Walk of at most `length` vertices from `start`, each step moving to a
/// uniformly chosen neighbour. Stops early at a vertex with no neighbours.
///
/// # Panics
/// If `start` is not a vertex of `g`.
pub fn random_walk<R: Rng + ?Sized>(g: &Graph, start: usize, length: usize, rng: &mut R) -> Vec<usize> {
    assert!(start < g.num_vertices(), "start vertex {start} out of range");
    let mut walk = Vec::with_capacity(length);
    walk.push(start);
    let mut current = start;
    while walk.len() < length {
        let nbrs = g.neighbors_unchecked(current);
        if nbrs.is_empty() {
            break;
        }
        current = nbrs[rng.random_range(0..nbrs.len())];
        walk.push(current);
    }
    walk
}

/// `walks_per_vertex` walks from every vertex; walk `i * walks_per_vertex + k`
/// starts at vertex `i`.
pub fn generate_corpus(g: &Graph, cfg: &WalkConfig) -> WalkCorpus {
    assert!(cfg.walk_length >= 1 && cfg.walks_per_vertex >= 1, "invalid walk config");
    let total = g.num_vertices() * cfg.walks_per_vertex;
    let one = |idx: usize| {
        let mut rng = walk_rng(cfg.seed, idx as u64);
        random_walk(g, idx / cfg.walks_per_vertex, cfg.walk_length, &mut rng)
    };
    let walks = if cfg.parallel {
        (0..total).into_par_iter().map(one).collect()
    } else {
        (0..total).map(one).collect()
    };
    WalkCorpus {
        walks,
        vocab: g.id_map().clone(),
    }
}

impl WalkCorpus {
    pub fn num_tokens(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    /// Occurrences of each vocabulary entry across all walks.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.vocab.len()];
        for w in &self.walks {
            for &v in w {
                counts[v] += 1;
            }
        }
        counts
    }

    /// One walk per line, space-separated external ids.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut line = String::new();
        for walk in &self.walks {
            line.clear();
            for (i, &v) in walk.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(self.vocab.external(v));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Read the line format written by [`WalkCorpus::write_to`]. The vocabulary
    /// is assigned in first-seen order.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut vocab = IdMap::new();
        let mut walks = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let walk: Vec<usize> = line.split_whitespace().map(|id| vocab.intern(id)).collect();
            if walk.is_empty() {
                return Err(ParseError::new(i + 1, "empty walk"));
            }
            walks.push(walk);
        }
        Ok(WalkCorpus { walks, vocab })
    }
}
