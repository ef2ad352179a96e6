use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "graphfolk", version, about = "Random-walk graph embeddings and attribute prediction")]
pub struct Cli {
    /// Flat TOML config whose keys mirror the flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; every stage derives its own seed from it.
    #[arg(long, global = true, env = "GRAPHFOLK_SEED")]
    pub seed: Option<u64>,
    /// Worker threads. 1 (the default) makes every stage reproducible.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct GraphArgs {
    /// Edge-list field separator: one character, `\t`, or `whitespace`.
    #[arg(long)]
    pub delimiter: Option<String>,
    /// Drop edges into accounts followed by fewer users than this.
    #[arg(long)]
    pub min_in_degree: Option<usize>,
    /// File of protected ids (one per line) exempt from pruning.
    #[arg(long)]
    pub keep: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct WalkArgs {
    /// Vertices per walk.
    #[arg(long)]
    pub walk_length: Option<usize>,
    #[arg(long)]
    pub walks_per_vertex: Option<usize>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct TrainArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window_radius: Option<usize>,
    /// Negative samples per positive pair.
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct EvalArgs {
    /// logistic (occ), ridge or kernel-ridge (income).
    #[arg(long)]
    pub learner: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub inner_folds: Option<usize>,
    /// Extra per-user features (embedding text format) concatenated to the
    /// embeddings, e.g. precomputed topic features.
    #[arg(long)]
    pub extra_features: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Occ,
    Income,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskSel {
    Occ,
    Income,
    Both,
}

impl TaskSel {
    pub fn tasks(self) -> Vec<TaskArg> {
        match self {
            TaskSel::Occ => vec![TaskArg::Occ],
            TaskSel::Income => vec![TaskArg::Income],
            TaskSel::Both => vec![TaskArg::Occ, TaskArg::Income],
        }
    }
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Drop edges into rarely followed accounts.
    Prune {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Write one random walk per line.
    Walk {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        walk: WalkArgs,
    },
    /// Train SkipGram embeddings on a walk corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Nested cross-validated prediction of occupational class or income.
    Eval {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Output directory for the text and JSON-lines reports.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Generate a stochastic block model graph and labels.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// prune, walk, train and eval in one go (optionally starting from synth).
    Pipeline {
        #[arg(long)]
        out_dir: PathBuf,
        /// Generate the input graph from this block-model spec.
        #[arg(long, conflicts_with_all = ["edges", "labels"])]
        synth: Option<PathBuf>,
        #[arg(long, required_unless_present = "synth")]
        edges: Option<PathBuf>,
        #[arg(long, required_unless_present = "synth")]
        labels: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        task: TaskSel,
        /// Train one embedding per dimension and select among them by nested CV.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
}
