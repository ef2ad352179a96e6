//! Graph embeddings for node attribute prediction.
//!
//! The pipeline mirrors the usual DeepWalk recipe: a follower graph is pruned
//! and symmetrized ([`graph`]), uniform random walks turn it into a corpus of
//! vertex "sentences" ([`walks`]), SkipGram with negative sampling learns one
//! dense vector per vertex ([`sgns`]), and linear models predict categorical
//! and continuous vertex labels from those vectors under nested
//! cross-validation ([`predict`]). [`synth`] plants communities with known
//! labels so the whole chain can be checked end to end.

pub mod graph;
pub mod predict;
pub mod seed;
pub mod sgns;
pub mod synth;
pub mod walks;

mod parse;

pub use graph::{EdgeList, Graph, GraphError};
pub use parse::ParseError;
pub use predict::{EvalReport, FeatureMatrix, LabeledDataset, Learner, Task};
pub use sgns::{EmbeddingModel, NoiseDistribution, SgnsConfig};
pub use synth::SbmSpec;

pub use walks::{WalkConfig, WalkCorpus};
