//! Python bindings: graph construction and pruning, random walks, SGNS
//! training, the noise distribution, block-model synthesis and nested
//! cross-validated evaluation. Matrices cross the boundary as lists of rows.

use std::collections::HashSet;

use graphfolk::graph::{self, Delimiter};
use graphfolk::predict::{
    self, default_grid, nested_cv_views, FoldPlan, LearnerKind, Targets,
};
use graphfolk::sgns::{self, SgnsConfig, NOISE_POWER};
use graphfolk::synth::{self, OCCUPATION_COUNTS};
use graphfolk::walks::{self, WalkConfig};
use graphfolk::{EdgeList, FeatureMatrix, SbmSpec};
use ndarray::Array2;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn edge_list(edges: Vec<(String, String)>) -> EdgeList {
    EdgeList::new(edges)
}

fn rows_to_array(rows: &[Vec<f64>]) -> PyResult<Array2<f64>> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(value_err("rows have different lengths"));
    }
    Array2::from_shape_vec((rows.len(), dim), rows.concat()).map_err(value_err)
}

/// Undirected graph over external string ids.
#[pyclass(frozen)]
struct Graph {
    inner: graphfolk::Graph,
}

#[pymethods]
impl Graph {
    /// Build from `(follower, followee)` pairs; direction is dropped.
    #[new]
    fn new(edges: Vec<(String, String)>) -> PyResult<Self> {
        let inner = graphfolk::Graph::build_undirected(&edge_list(edges)).map_err(value_err)?;
        Ok(Graph { inner })
    }

    /// Parse edge-list text; `delimiter` is one character, default whitespace.
    #[staticmethod]
    #[pyo3(signature = (text, delimiter=None))]
    fn parse(text: &str, delimiter: Option<char>) -> PyResult<Self> {
        let delim = delimiter.map_or(Delimiter::Whitespace, Delimiter::Char);
        let edges = EdgeList::parse(text, delim).map_err(value_err)?;
        let inner = graphfolk::Graph::build_undirected(&edges).map_err(value_err)?;
        Ok(Graph { inner })
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    /// External ids in index order.
    fn ids(&self) -> Vec<String> {
        self.inner.id_map().ids().to_vec()
    }

    fn index(&self, id: &str) -> PyResult<usize> {
        self.inner.id_map().get(id).ok_or_else(|| PyKeyError::new_err(id.to_string()))
    }

    fn degree(&self, id: &str) -> PyResult<usize> {
        self.inner.degree(self.index(id)?).map_err(value_err)
    }

    fn neighbors(&self, id: &str) -> PyResult<Vec<String>> {
        let map = self.inner.id_map();
        let nbrs = self.inner.neighbors(self.index(id)?).map_err(value_err)?;
        Ok(nbrs.iter().map(|&v| map.external(v).to_string()).collect())
    }

    fn has_edge(&self, a: &str, b: &str) -> PyResult<bool> {
        Ok(self.inner.has_edge(self.index(a)?, self.index(b)?))
    }

    fn edges(&self) -> Vec<(String, String)> {
        self.inner.to_edge_list().edges
    }

    fn __repr__(&self) -> String {
        format!("Graph(num_vertices={}, num_edges={})", self.inner.num_vertices(), self.inner.num_edges())
    }
}

/// Drop edges whose target has fewer than `min_in` distinct followers,
/// except edges into ids listed in `keep`.
#[pyfunction]
#[pyo3(signature = (edges, min_in, keep=None))]
fn prune_by_in_degree(
    edges: Vec<(String, String)>,
    min_in: usize,
    keep: Option<Vec<String>>,
) -> Vec<(String, String)> {
    let keep: HashSet<String> = keep.unwrap_or_default().into_iter().collect();
    graph::prune_by_in_degree_with_keep(&edge_list(edges), min_in, &keep).edges
}

/// A walk corpus over a graph's vocabulary.
#[pyclass(frozen)]
struct Corpus {
    inner: graphfolk::WalkCorpus,
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    #[pyo3(signature = (graph, walk_length=80, walks_per_vertex=1, seed=0, parallel=false))]
    fn from_graph(graph: &Graph, walk_length: usize, walks_per_vertex: usize, seed: u64, parallel: bool) -> PyResult<Self> {
        if walk_length == 0 || walks_per_vertex == 0 {
            return Err(value_err("walk_length and walks_per_vertex must be at least 1"));
        }
        let cfg = WalkConfig { walk_length, walks_per_vertex, seed, parallel };
        Ok(Corpus { inner: walks::generate_corpus(&graph.inner, &cfg) })
    }

    /// Walks as lists of external ids.
    fn walks(&self) -> Vec<Vec<String>> {
        let vocab = &self.inner.vocab;
        self.inner.walks.iter().map(|w| w.iter().map(|&v| vocab.external(v).to_string()).collect()).collect()
    }

    fn counts(&self) -> Vec<u64> {
        self.inner.counts()
    }

    #[getter]
    fn num_tokens(&self) -> usize {
        self.inner.num_tokens()
    }

    fn __len__(&self) -> usize {
        self.inner.walks.len()
    }
}

/// Trained embedding: one input vector per vocabulary id.
#[pyclass(frozen)]
struct Embedding {
    features: FeatureMatrix,
    #[pyo3(get)]
    epoch_losses: Vec<f64>,
}

#[pymethods]
impl Embedding {
    fn ids(&self) -> Vec<String> {
        self.features.ids().to_vec()
    }

    fn vectors(&self) -> Vec<Vec<f64>> {
        self.features.values().rows().into_iter().map(|r| r.to_vec()).collect()
    }

    fn vector(&self, id: &str) -> PyResult<Vec<f64>> {
        let i = self
            .features
            .ids()
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| PyKeyError::new_err(id.to_string()))?;
        Ok(self.features.values().row(i).to_vec())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.features.dim()
    }

    /// Text export: a `<rows> <dim>` header, then `id v1 .. vd` per line.
    fn to_text(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.features.write_to(&mut buf).map_err(value_err)?;
        String::from_utf8(buf).map_err(value_err)
    }
}

#[pyfunction]
#[pyo3(signature = (corpus, dim=32, window_radius=5, negatives=5, lr=0.025, epochs=5, seed=0, threads=1))]
#[allow(clippy::too_many_arguments)]
fn train_embedding(
    py: Python<'_>,
    corpus: &Corpus,
    dim: usize,
    window_radius: usize,
    negatives: usize,
    lr: f64,
    epochs: usize,
    seed: u64,
    threads: usize,
) -> PyResult<Embedding> {
    let cfg = SgnsConfig { dim, window_radius, negatives, initial_lr: lr, epochs, power: NOISE_POWER, seed, threads };
    let out = py.detach(|| sgns::train(&corpus.inner, &cfg)).map_err(value_err)?;
    Ok(Embedding { features: out.model.to_features(), epoch_losses: out.epoch_losses })
}

/// Negative-sampling distribution `count^power / sum`.
#[pyclass(frozen)]
struct NoiseDistribution {
    inner: sgns::NoiseDistribution,
}

#[pymethods]
impl NoiseDistribution {
    #[new]
    #[pyo3(signature = (counts, power=NOISE_POWER))]
    fn new(counts: Vec<u64>, power: f64) -> PyResult<Self> {
        Ok(NoiseDistribution { inner: sgns::NoiseDistribution::from_counts(&counts, power).map_err(value_err)? })
    }

    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, n: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.inner.sample(&mut rng)).collect()
    }
}

/// Sample a stochastic block model. Returns `(edges, labels)` where labels
/// are `(id, occ_class, income)` rows. Without `block_sizes`, `total` users
/// are split over nine blocks in occupational-class proportions.
#[pyfunction]
#[pyo3(signature = (p_in, p_out, total=900, block_sizes=None, classes=None, income_means=None, income_stddev=3000.0, seed=0))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn generate_sbm(
    p_in: f64,
    p_out: f64,
    total: usize,
    block_sizes: Option<Vec<usize>>,
    classes: Option<Vec<u8>>,
    income_means: Option<Vec<f64>>,
    income_stddev: f64,
    seed: u64,
) -> PyResult<(Vec<(String, String)>, Vec<(String, Option<u8>, Option<f64>)>)> {
    let sizes = block_sizes.unwrap_or_else(|| synth::proportional_sizes(total, &OCCUPATION_COUNTS));
    let k = sizes.len();
    let spec = SbmSpec {
        class_of_block: classes.unwrap_or_else(|| (1..=k as u8).collect()),
        income_of_block: match income_means {
            Some(m) => m.into_iter().map(|x| (x, income_stddev)).collect(),
            None => synth::spaced_incomes(k, 15_000.0, 80_000.0, income_stddev),
        },
        block_sizes: sizes,
        p_in,
        p_out,
        seed,
    };
    let sbm = synth::generate_sbm(&spec).map_err(value_err)?;
    let labels = sbm.labels.rows.into_iter().map(|r| (r.id, r.occ_class, r.income)).collect();
    Ok((sbm.edges.edges, labels))
}

#[pyfunction]
fn accuracy(pred: Vec<u8>, truth: Vec<u8>) -> PyResult<f64> {
    predict::evaluate_classification(&pred, &truth).map_err(value_err)
}

/// `(mae, rho)`; `rho` is `None` when either side is constant.
#[pyfunction]
fn regression_metrics(pred: Vec<f64>, truth: Vec<f64>) -> PyResult<(f64, Option<f64>)> {
    let m = predict::evaluate_regression(&pred, &truth).map_err(value_err)?;
    Ok((m.mae, m.rho))
}

/// Nested cross-validation. Pass integer `classes` (1..=9) for occupational
/// class or float `incomes` for income; `views` maps a name to one feature
/// row per sample. Returns the report as a dict (per-fold records plus the
/// aggregate).
#[pyfunction]
#[pyo3(signature = (views, classes=None, incomes=None, learner=None, folds=10, inner_folds=10, seed=0))]
#[allow(clippy::too_many_arguments)]
fn nested_cv(
    py: Python<'_>,
    views: Vec<(String, Vec<Vec<f64>>)>,
    classes: Option<Vec<u8>>,
    incomes: Option<Vec<f64>>,
    learner: Option<&str>,
    folds: usize,
    inner_folds: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let y = match (classes, incomes) {
        (Some(c), None) => Targets::Classes(c),
        (None, Some(v)) => Targets::Values(v),
        _ => return Err(value_err("pass exactly one of classes or incomes")),
    };
    let kind = match (learner, &y) {
        (None | Some("logistic"), Targets::Classes(_)) => LearnerKind::Logistic,
        (None | Some("ridge"), Targets::Values(_)) => LearnerKind::Ridge,
        (Some("kernel-ridge"), Targets::Values(_)) => LearnerKind::KernelRidge,
        (Some(other), _) => return Err(value_err(format!("learner {other:?} does not fit these targets"))),
    };
    let arrays = views.iter().map(|(_, rows)| rows_to_array(rows)).collect::<PyResult<Vec<_>>>()?;
    let dim = arrays.first().map_or(0, |a| a.ncols());
    let report = py
        .detach(|| {
            let plan = FoldPlan::for_targets(&y, folds, inner_folds, seed)?;
            let refs: Vec<(&str, _)> = views.iter().zip(&arrays).map(|((n, _), a)| (n.as_str(), a.view())).collect();
            nested_cv_views(&refs, &y, &default_grid(kind, dim), &plan)
        })
        .map_err(value_err)?;
    let json = serde_json::to_string(&report).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (json,))?.unbind())
}

#[pymodule]
fn graphfolk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<Corpus>()?;
    m.add_class::<Embedding>()?;
    m.add_class::<NoiseDistribution>()?;
    m.add_function(wrap_pyfunction!(prune_by_in_degree, m)?)?;
    m.add_function(wrap_pyfunction!(train_embedding, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sbm, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(regression_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(nested_cv, m)?)?;
    Ok(())
}
