//! Follower graphs: edge-list ingestion, in-degree pruning and the undirected
//! CSR adjacency that the walkers sample from.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::parse::ParseError;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed edge list: {0}")]
    Parse(#[from] ParseError),
    #[error("edge list has no usable edges")]
    EmptyGraph,
    #[error("vertex {vertex} out of range for graph with {len} vertices")]
    VertexOutOfRange { vertex: usize, len: usize },
}

/// Field separator of an edge-list file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    /// Any run of ASCII/Unicode whitespace.
    #[default]
    Whitespace,
    Char(char),
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Char(c) => line.split(*c).map(str::trim).collect(),
        }
    }

    fn as_output(&self) -> char {
        match self {
            Delimiter::Whitespace => ' ',
            Delimiter::Char(c) => *c,
        }
    }
}

/// Directed `(source, target)` pairs keyed by external id, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    pub edges: Vec<(String, String)>,
}

impl EdgeList {
    pub fn new(edges: Vec<(String, String)>) -> Self {
        EdgeList { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Parse edge-list text. `#` lines and blank lines are skipped; duplicate
    /// edges are kept.
    pub fn parse(text: &str, delimiter: Delimiter) -> Result<Self, ParseError> {
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields = delimiter.split(line);
            if fields.len() != 2 {
                return Err(ParseError::new(
                    i + 1,
                    format!("expected 2 fields, found {}", fields.len()),
                ));
            }
            if fields.iter().any(|f| f.is_empty()) {
                return Err(ParseError::new(i + 1, "empty vertex id"));
            }
            edges.push((fields[0].to_string(), fields[1].to_string()));
        }
        Ok(EdgeList { edges })
    }

    pub fn write_to<W: Write>(&self, mut w: W, delimiter: Delimiter) -> io::Result<()> {
        let sep = delimiter.as_output();
        for (s, t) in &self.edges {
            writeln!(w, "{s}{sep}{t}")?;
        }
        Ok(())
    }

    /// Number of distinct followers of each target. Self-loops do not count.
    pub fn in_degrees(&self) -> HashMap<&str, usize> {
        let mut seen: HashSet<(&str, &str)> = HashSet::new();
        let mut deg: HashMap<&str, usize> = HashMap::new();
        for (s, t) in &self.edges {
            if s != t && seen.insert((s.as_str(), t.as_str())) {
                *deg.entry(t.as_str()).or_default() += 1;
            }
        }
        deg
    }
}

/// Read an edge-list file.
pub fn load_edge_list(path: impl AsRef<Path>, delimiter: Delimiter) -> Result<EdgeList, GraphError> {
    let text = fs::read_to_string(path)?;
    Ok(EdgeList::parse(&text, delimiter)?)
}

/// Keep only edges whose target has at least `min_in` distinct followers.
/// Sources are never removed by this rule.
pub fn prune_by_in_degree(edges: &EdgeList, min_in: usize) -> EdgeList {
    prune_by_in_degree_with_keep(edges, min_in, &HashSet::new())
}

/// Like [`prune_by_in_degree`], but edges into any id in `keep` survive
/// regardless of its in-degree (the labelled seed users).
pub fn prune_by_in_degree_with_keep(
    edges: &EdgeList,
    min_in: usize,
    keep: &HashSet<String>,
) -> EdgeList {
    if min_in == 0 {
        return edges.clone();
    }
    let deg = edges.in_degrees();
    let kept = edges
        .edges
        .iter()
        .filter(|(_, t)| keep.contains(t) || deg.get(t.as_str()).copied().unwrap_or(0) >= min_in)
        .cloned()
        .collect();
    EdgeList { edges: kept }
}

/// Dense-index ↔ external-id bijection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of `id`, assigning the next free index on first sight.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn external(&self, v: usize) -> &str {
        &self.ids[v]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl FromIterator<String> for IdMap {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut map = IdMap::new();
        for id in iter {
            map.intern(&id);
        }
        map
    }
}

/// Undirected simple graph in compressed-sparse-row form.
///
/// Neighbour lists are sorted ascending and duplicate-free, so "the x-th
/// lowest-indexed neighbour" is a slice lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    id_map: IdMap,
}

impl Graph {
    /// Symmetrize a directed edge list. Duplicates collapse, self-loops are
    /// dropped, and indices follow first-seen order of the ids that survive.
    pub fn build_undirected(edges: &EdgeList) -> Result<Self, GraphError> {
        let mut id_map = IdMap::new();
        let mut pairs = Vec::with_capacity(edges.len() * 2);
        for (s, t) in &edges.edges {
            if s == t {
                continue;
            }
            let u = id_map.intern(s);
            let v = id_map.intern(t);
            pairs.push((u, v));
            pairs.push((v, u));
        }
        if pairs.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_pairs(id_map, &pairs))
    }

    /// Build from per-vertex neighbour lists over `ids`. Lists are symmetrized,
    /// sorted and deduplicated; self-loops are dropped. Unlike
    /// [`Graph::build_undirected`] this keeps isolated vertices.
    pub fn from_adjacency(ids: Vec<String>, adjacency: &[Vec<usize>]) -> Result<Self, GraphError> {
        let n = ids.len();
        let id_map: IdMap = ids.into_iter().collect();
        if id_map.len() != n || adjacency.len() != n {
            return Err(ParseError::new(0, "ids must be unique and match the adjacency rows").into());
        }
        let mut pairs = Vec::new();
        for (u, list) in adjacency.iter().enumerate() {
            for &v in list {
                if v >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: v, len: n });
                }
                if u != v {
                    pairs.push((u, v));
                    pairs.push((v, u));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_pairs(id_map, &pairs))
    }

    /// Build from dense-index pairs; both directions must be present.
    fn from_sorted_pairs(id_map: IdMap, pairs: &[(usize, usize)]) -> Self {
        let n = id_map.len();
        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in pairs {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let neighbors = pairs.iter().map(|&(_, v)| v).collect();
        Graph {
            offsets,
            neighbors,
            id_map,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.id_map.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn degree(&self, v: usize) -> Result<usize, GraphError> {
        self.check(v)?;
        Ok(self.offsets[v + 1] - self.offsets[v])
    }

    pub fn neighbors(&self, v: usize) -> Result<&[usize], GraphError> {
        self.check(v)?;
        Ok(self.neighbors_unchecked(v))
    }

    #[inline]
    pub(crate) fn neighbors_unchecked(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_vertices() && self.neighbors_unchecked(u).binary_search(&v).is_ok()
    }

    pub fn id_map(&self) -> &IdMap {
        &self.id_map
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    fn check(&self, v: usize) -> Result<(), GraphError> {
        if v < self.num_vertices() {
            Ok(())
        } else {
            Err(GraphError::VertexOutOfRange {
                vertex: v,
                len: self.num_vertices(),
            })
        }
    }

    /// Each undirected edge once, ordered so that rebuilding from the result
    /// reproduces the same dense indices.
    ///
    /// Vertex `k` was first seen either next to a lower index (then that edge
    /// introduces it) or together with `k + 1` (then `(k, k + 1)` exists).
    pub fn to_edge_list(&self) -> EdgeList {
        let n = self.num_vertices();
        let mut emitted = HashSet::new();
        let mut order = Vec::with_capacity(self.num_edges());
        let mut introduced = vec![false; n];
        for k in 0..n {
            if introduced[k] {
                continue;
            }
            let nbrs = self.neighbors_unchecked(k);
            let edge = match nbrs.first() {
                Some(&j) if j < k => (j, k),
                _ => (k, k + 1),
            };
            debug_assert!(self.has_edge(edge.0, edge.1));
            introduced[edge.0] = true;
            introduced[edge.1] = true;
            emitted.insert((edge.0.min(edge.1), edge.0.max(edge.1)));
            order.push(edge);
        }
        for u in 0..n {
            for &v in self.neighbors_unchecked(u) {
                if u < v && !emitted.contains(&(u, v)) {
                    order.push((u, v));
                }
            }
        }
        EdgeList {
            edges: order
                .into_iter()
                .map(|(u, v)| (self.id_map.external(u).to_string(), self.id_map.external(v).to_string()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(pairs: &[(&str, &str)]) -> EdgeList {
        EdgeList::new(pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect())
    }

    fn deg(g: &Graph, id: &str) -> usize {
        g.degree(g.id_map().get(id).unwrap()).unwrap()
    }

    #[test]
    fn parse_plain_and_comments() {
        assert_eq!(EdgeList::parse("a b\nb c", Delimiter::Whitespace).unwrap(), el(&[("a", "b"), ("b", "c")]));
        assert_eq!(EdgeList::parse("# hdr\na b", Delimiter::Whitespace).unwrap(), el(&[("a", "b")]));
        assert_eq!(EdgeList::parse("a,b\n", Delimiter::Char(',')).unwrap(), el(&[("a", "b")]));
    }

    #[test]
    fn parse_reports_line_of_bad_field_count() {
        let err = EdgeList::parse("a", Delimiter::Whitespace).unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("2 fields"));
        let err = EdgeList::parse("a b\n#x\nc d e", Delimiter::Whitespace).unwrap_err();
        assert_eq!(err.line, 3);
        assert!(EdgeList::parse("a,", Delimiter::Char(',')).is_err());
    }

    #[test]
    fn duplicates_survive_parsing() {
        assert_eq!(EdgeList::parse("a b\na b", Delimiter::Whitespace).unwrap().len(), 2);
    }

    #[test]
    fn load_missing_file_is_io_error() {
        let err = load_edge_list("/nonexistent/edges.txt", Delimiter::Whitespace).unwrap_err();
        assert!(matches!(err, GraphError::Io(_)));
    }

    #[test]
    fn prune_threshold_boundary() {
        let mut pairs = Vec::new();
        for i in 0..12 {
            pairs.push((format!("f{i}"), "x".to_string()));
        }
        for i in 0..9 {
            pairs.push((format!("f{i}"), "y".to_string()));
        }
        let edges = EdgeList::new(pairs);
        let pruned = prune_by_in_degree(&edges, 10);
        assert_eq!(pruned.len(), 12);
        assert!(pruned.edges.iter().all(|(_, t)| t == "x"));
        assert_eq!(prune_by_in_degree(&edges, 0), edges);
    }

    #[test]
    fn prune_star_of_ten_keeps_hub() {
        let edges = EdgeList::new((0..10).map(|i| (format!("f{i}"), "hub".to_string())).collect());
        assert_eq!(prune_by_in_degree(&edges, 10).len(), 10);
        assert_eq!(prune_by_in_degree(&edges, 11).len(), 0);
    }

    #[test]
    fn keep_set_protects_low_in_degree_target() {
        let edges = el(&[("a", "seed"), ("a", "b"), ("c", "b")]);
        let keep: HashSet<String> = ["seed".to_string()].into();
        assert_eq!(prune_by_in_degree(&edges, 2), el(&[("a", "b"), ("c", "b")]));
        assert_eq!(prune_by_in_degree_with_keep(&edges, 2, &keep), edges);
    }

    #[test]
    fn build_symmetric_degrees() {
        let g = Graph::build_undirected(&el(&[("a", "b")])).unwrap();
        assert_eq!((deg(&g, "a"), deg(&g, "b")), (1, 1));
        let g = Graph::build_undirected(&el(&[("a", "b"), ("b", "a")])).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!((deg(&g, "a"), deg(&g, "b")), (1, 1));
        let g = Graph::build_undirected(&el(&[("a", "b"), ("a", "c"), ("c", "a")])).unwrap();
        assert_eq!((deg(&g, "a"), deg(&g, "b"), deg(&g, "c")), (2, 1, 1));
    }

    #[test]
    fn self_loops_dropped_and_isolated_ids_absent() {
        let g = Graph::build_undirected(&el(&[("a", "a"), ("b", "c")])).unwrap();
        assert_eq!(g.num_vertices(), 2);
        assert!(g.id_map().get("a").is_none());
        assert!(matches!(Graph::build_undirected(&el(&[("a", "a")])), Err(GraphError::EmptyGraph)));
        assert!(matches!(Graph::build_undirected(&EdgeList::default()), Err(GraphError::EmptyGraph)));
    }

    #[test]
    fn degree_path_and_clique() {
        let g = Graph::build_undirected(&el(&[("a", "b"), ("b", "c")])).unwrap();
        assert_eq!(deg(&g, "b"), 2);
        assert_eq!(deg(&g, "a"), 1);
        assert!(matches!(g.degree(3), Err(GraphError::VertexOutOfRange { vertex: 3, len: 3 })));

        let mut pairs = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                pairs.push((i.to_string(), j.to_string()));
            }
        }
        let g = Graph::build_undirected(&EdgeList::new(pairs)).unwrap();
        for v in 0..5 {
            assert_eq!(g.degree(v).unwrap(), 4);
        }
    }

    #[test]
    fn first_seen_indexing() {
        let g = Graph::build_undirected(&el(&[("z", "y"), ("x", "z")])).unwrap();
        assert_eq!(g.id_map().ids(), &["z", "y", "x"]);
    }

    fn arb_edges() -> impl Strategy<Value = EdgeList> {
        prop::collection::vec((0u8..30, 0u8..30), 1..120).prop_map(|v| {
            EdgeList::new(v.into_iter().map(|(a, b)| (format!("n{a}"), format!("n{b}"))).collect())
        })
    }

    proptest! {
        #[test]
        fn csr_invariants(edges in arb_edges()) {
            let Ok(g) = Graph::build_undirected(&edges) else {
                prop_assert!(edges.edges.iter().all(|(a, b)| a == b));
                return Ok(());
            };
            let n = g.num_vertices();
            prop_assert_eq!(g.offsets()[n], g.neighbors.len());
            prop_assert!(g.offsets().windows(2).all(|w| w[0] <= w[1]));
            let mut degree_sum = 0;
            for u in 0..n {
                let nb = g.neighbors(u).unwrap();
                prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(!nb.contains(&u));
                degree_sum += nb.len();
                for v in 0..n {
                    prop_assert_eq!(g.has_edge(u, v), g.has_edge(v, u));
                }
            }
            prop_assert_eq!(degree_sum, 2 * g.num_edges());
        }

        #[test]
        fn rebuild_is_identical(edges in arb_edges()) {
            if let Ok(g) = Graph::build_undirected(&edges) {
                let again = Graph::build_undirected(&g.to_edge_list()).unwrap();
                prop_assert_eq!(&again, &g);
                prop_assert_eq!(g.to_edge_list().len(), g.num_edges());
            }
        }

        #[test]
        fn prune_zero_is_identity(edges in arb_edges()) {
            prop_assert_eq!(prune_by_in_degree(&edges, 0), edges);
        }
    }
}
